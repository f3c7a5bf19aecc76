//! `simulate`: Monte-Carlo rejection rates of the proposed test and the two
//! baselines over freshly generated synthetic datasets.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use credal_core::datagen::{generate, Case, ScenarioSpec};
use credal_core::testkit::{run_credal_test, run_mortier_baseline, run_npbe_on_fixed_predictor, MIN_MORTIER_SAMPLES};
use credal_core::{TestConfig, TestResult, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_alpha, create_dir, derive_seed, thread_pool, EstimatorChoice, DEFAULT_BANDWIDTH};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::svg::{line_plot, Series};
use crate::sweep::{write_text, RepetitionRecord, SweepReport};

pub const METHOD_PROPOSED: &str = "proposed";
pub const METHOD_MEAN: &str = "avg_npbe";
pub const METHOD_MORTIER: &str = "mortier";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "binary")]
    pub family: FamilyArg,
    /// Scenario cases, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "H01,H02,H11,H12,H13", value_parser = parse_case)]
    pub cases: Vec<Case>,
    #[arg(long, value_delimiter = ',', default_value = "ce2,cekl")]
    pub estimators: Vec<EstimatorChoice>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.2,0.25")]
    pub alphas: Vec<f64>,
    /// Size of each of the optimisation and validation sets.
    #[arg(long = "n", short = 'N', default_value_t = 400)]
    pub n: usize,
    /// Ensemble size (binary: always 2; multiclass default 10).
    #[arg(long = "m", short = 'M')]
    pub m: Option<usize>,
    /// Number of classes (binary: always 2; multiclass default 5).
    #[arg(long = "k", short = 'K')]
    pub k: Option<usize>,
    /// Spread of multiclass members around their prior.
    #[arg(long, default_value_t = 0.5)]
    pub u: f64,
    #[arg(long, default_value_t = 200)]
    pub repetitions: u64,
    /// Index of the first repetition; runs over disjoint ranges can be merged.
    #[arg(long, default_value_t = 0)]
    pub rep_offset: u64,
    /// Bootstrap rounds per test.
    #[arg(long = "bootstrap-iters", short = 'D', default_value_t = 100)]
    pub bootstrap_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
    /// Kernel scale for cek/cemmd (default: median pairwise distance).
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Constant weight samples of the Mortier baseline.
    #[arg(long, default_value_t = MIN_MORTIER_SAMPLES)]
    pub mortier_samples: usize,
    /// Skip the Mortier baseline.
    #[arg(long)]
    pub no_mortier: bool,
    /// Also resample instances with replacement in every bootstrap round,
    /// not only labels.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub resample_instances: bool,
    /// Also write `timings.csv` (wall-clock, not reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

pub(crate) fn parse_case(s: &str) -> Result<Case, String> {
    s.parse::<Case>().map_err(|e| e.to_string())
}

impl SimulateArgs {
    fn shape(&self) -> (usize, usize) {
        match self.family {
            FamilyArg::Binary => (self.m.unwrap_or(2), self.k.unwrap_or(2)),
            FamilyArg::Multiclass => (self.m.unwrap_or(10), self.k.unwrap_or(5)),
        }
    }

    fn scenario(&self, case: Case, seed: u64) -> ScenarioSpec {
        let (m, k) = self.shape();
        let mut spec = match self.family {
            FamilyArg::Binary => ScenarioSpec::binary(case, 2 * self.n, seed),
            FamilyArg::Multiclass => ScenarioSpec::multiclass(case, 2 * self.n, m, k, seed),
        };
        spec.m = m;
        spec.k = k;
        spec.u = self.u;
        spec
    }

    fn validate(&self) -> CliResult<()> {
        if self.cases.is_empty() || self.estimators.is_empty() || self.alphas.is_empty() {
            return Err(CliError::Usage("cases, estimators and alphas must be non-empty".into()));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        if self.repetitions == 0 {
            return Err(CliError::Usage("need at least one repetition".into()));
        }
        if self.rep_offset.checked_add(self.repetitions).is_none() {
            return Err(CliError::Usage("repetition range overflows".into()));
        }
        if self.n < 10 {
            return Err(CliError::Usage(format!("N={} too small (need 10)", self.n)));
        }
        for &case in &self.cases {
            self.scenario(case, 0).validate()?;
        }
        for &e in &self.estimators {
            let kind = e.resolve(self.bandwidth, self.kernel_scale.or(Some(1.0)), &credal_core::Matrix::zeros(1, 2));
            self.train_config(kind, 0).validate()?;
            TestConfig::new(0.05, self.bootstrap_iters, kind, 0)?;
        }
        if !self.no_mortier && self.mortier_samples < MIN_MORTIER_SAMPLES {
            return Err(CliError::Usage(format!(
                "--mortier-samples {} below {MIN_MORTIER_SAMPLES}",
                self.mortier_samples
            )));
        }
        Ok(())
    }

    fn train_config(&self, kind: credal_core::CalEstimatorKind, seed: u64) -> TrainConfig {
        let mut tc = TrainConfig::synthetic(kind, seed);
        tc.gamma = self.gamma;
        if let Some(lr) = self.learning_rate {
            tc.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            tc.epochs = e;
        }
        if let Some(p) = self.patience {
            tc.patience = p;
        }
        tc
    }
}

fn case_code(case: Case) -> u64 {
    Case::ALL.iter().position(|&c| c == case).expect("listed") as u64
}

fn estimator_code(e: EstimatorChoice) -> u64 {
    EstimatorChoice::ALL.iter().position(|&x| x == e).expect("listed") as u64
}

struct Timed {
    record: RepetitionRecord,
    millis: f64,
}

fn record(
    case: Case,
    e: EstimatorChoice,
    method: &str,
    rep: u64,
    r: &TestResult,
    alphas: &[f64],
    millis: f64,
) -> Timed {
    Timed {
        record: RepetitionRecord {
            case: case.name().into(),
            estimator: e.name().into(),
            method: method.into(),
            repetition: rep,
            statistic: r.statistic,
            p_value: r.p_value,
            rejections: alphas.iter().map(|&a| r.reject_at(a)).collect(),
        },
        millis,
    }
}

fn run_job(args: &SimulateArgs, case: Case, rep: u64) -> CliResult<Vec<Timed>> {
    let data_seed = derive_seed(args.seed, &[case_code(case), rep, 0]);
    let (data, _) = generate(&args.scenario(case, data_seed))?;
    let (opt, val) = data.split_at(args.n)?;
    let labels = val.require_labels()?;
    let mean = val.mean_predictions();
    let mut out = Vec::new();
    for &e in &args.estimators {
        let node = [case_code(case), rep, 1 + estimator_code(e)];
        let kind = e.resolve(args.bandwidth, args.kernel_scale, &opt.mean_predictions());
        let train = args.train_config(kind, derive_seed(args.seed, &[node[0], node[1], node[2], 0]));
        let cfg =
            TestConfig::new(0.05, args.bootstrap_iters, kind, derive_seed(args.seed, &[node[0], node[1], node[2], 1]))?
                .with_resample_instances(args.resample_instances);

        let t = Instant::now();
        let proposed = run_credal_test(&opt, &val, &train, &cfg)?.result;
        out.push(record(case, e, METHOD_PROPOSED, rep, &proposed, &args.alphas, ms(t)));

        let t = Instant::now();
        let avg = run_npbe_on_fixed_predictor(&mean, labels, &cfg)?;
        out.push(record(case, e, METHOD_MEAN, rep, &avg, &args.alphas, ms(t)));

        if !args.no_mortier {
            let t = Instant::now();
            let mortier = run_mortier_baseline(&val, &cfg, args.mortier_samples)?;
            out.push(record(case, e, METHOD_MORTIER, rep, &mortier, &args.alphas, ms(t)));
        }
    }
    Ok(out)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the sweep and writes `sweep.csv`, `sweep.json`, one SVG per case and
/// `manifest.json` into `--out-dir`.
pub fn run(args: &SimulateArgs) -> CliResult<SweepReport> {
    args.validate()?;
    let pool = thread_pool(args.threads)?;
    let jobs: Vec<(Case, u64)> = args
        .cases
        .iter()
        .flat_map(|&c| (args.rep_offset..args.rep_offset + args.repetitions).map(move |r| (c, r)))
        .collect();
    let results: Vec<Vec<Timed>> =
        pool.install(|| jobs.par_iter().map(|&(case, rep)| run_job(args, case, rep)).collect::<CliResult<_>>())?;
    let timed: Vec<Timed> = results.into_iter().flatten().collect();

    let config = serde_json::to_value(args).expect("arguments serialize");
    let report = SweepReport::from_records(
        config.clone(),
        args.alphas.clone(),
        timed.iter().map(|t| t.record.clone()).collect(),
    )?;
    create_dir(&args.out_dir)?;
    write_report(&report, &args.out_dir)?;
    if args.timings {
        write_text(&args.out_dir.join("timings.csv"), &timings_csv(&timed))?;
    }
    Manifest::new("simulate", args.seed, config).write(&args.out_dir)?;
    Ok(report)
}

/// (estimator, method) to the (alpha, rate) points of one plotted line.
type CaseLines = BTreeMap<(String, String), Vec<(f64, f64)>>;

/// Writes the CSV, JSON and per-case plots of `report`.
pub fn write_report(report: &SweepReport, dir: &std::path::Path) -> CliResult<()> {
    write_text(&dir.join("sweep.csv"), &report.to_csv())?;
    write_text(&dir.join("sweep.json"), &(report.to_json() + "\n"))?;
    let mut by_case: BTreeMap<&str, CaseLines> = BTreeMap::new();
    for row in &report.rows {
        by_case
            .entry(row.case.as_str())
            .or_default()
            .entry((row.estimator.clone(), row.method.clone()))
            .or_default()
            .push((row.alpha, row.rejection_rate));
    }
    for (case, lines) in by_case {
        let names: Vec<String> = lines.keys().map(|(e, m)| format!("{m} ({e})")).collect();
        let series: Vec<Series> =
            lines.values().zip(&names).map(|(pts, name)| Series { name, points: pts.clone() }).collect();
        let svg = line_plot(&format!("{case}: rejection rate"), "significance level", "rejection rate", &series, true);
        write_text(&dir.join(format!("sweep_{case}.svg")), &svg)?;
    }
    Ok(())
}

fn timings_csv(timed: &[Timed]) -> String {
    let mut acc: BTreeMap<(&str, &str, &str), (f64, usize)> = BTreeMap::new();
    for t in timed {
        let r = &t.record;
        let e = acc.entry((&r.case, &r.estimator, &r.method)).or_default();
        e.0 += t.millis;
        e.1 += 1;
    }
    let mut s = String::from("case,estimator,method,repetitions,mean_runtime_ms\n");
    for ((c, e, m), (total, n)) in acc {
        s.push_str(&format!("{c},{e},{m},{n},{:.3}\n", total / n as f64));
    }
    s
}
