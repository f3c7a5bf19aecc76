//! `null-dist`: distribution of each estimator when labels are drawn from
//! the predictions themselves, i.e. for a perfectly calibrated predictor.

use std::path::PathBuf;

use clap::Args;
use credal_core::estimators::EstimatorCache;
use credal_core::random::{sample_categorical, sample_dirichlet};
use credal_core::testkit::quantile_type7;
use credal_core::{Matrix, RngStream};
use rayon::prelude::*;
use serde::Serialize;

use super::{create_dir, thread_pool, EstimatorChoice, DEFAULT_BANDWIDTH};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::svg::histogram;
use crate::sweep::write_text;

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Args, Serialize)]
pub struct NullDistArgs {
    #[arg(long, value_delimiter = ',', default_value = "ce2,cekl,cek,cemmd")]
    pub estimators: Vec<EstimatorChoice>,
    #[arg(long = "n", short = 'N', default_value_t = 1000)]
    pub n: usize,
    #[arg(long = "k", short = 'K', default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 500)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSummary {
    pub estimator: String,
    pub mean: f64,
    pub sd: f64,
    pub q95: f64,
    pub values: Vec<f64>,
}

impl NullSummary {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.sd / (self.values.len() as f64).sqrt()
    }
}

pub fn run(args: &NullDistArgs) -> CliResult<Vec<NullSummary>> {
    if args.resamples < MIN_RESAMPLES {
        return Err(CliError::Usage(format!("--resamples {} below {MIN_RESAMPLES}", args.resamples)));
    }
    if args.n < 2 || args.k < 2 || args.estimators.is_empty() {
        return Err(CliError::Usage("need N >= 2, K >= 2 and at least one estimator".into()));
    }
    let root = RngStream::from_seed(args.seed);
    let mut rng = root.substream(0).rng();
    let alpha = vec![1.0; args.k];
    let mut flat = Vec::with_capacity(args.n * args.k);
    for _ in 0..args.n {
        flat.extend(sample_dirichlet(&alpha, &mut rng)?.into_vec());
    }
    let preds = Matrix::new(args.n, args.k, flat)?;
    let caches: Vec<EstimatorCache> = args
        .estimators
        .iter()
        .map(|e| EstimatorCache::new(e.resolve(args.bandwidth, args.kernel_scale, &preds), &preds))
        .collect::<Result<_, _>>()?;

    let pool = thread_pool(args.threads)?;
    let draws: Vec<Vec<f64>> = pool.install(|| {
        (0..args.resamples)
            .into_par_iter()
            .map(|r| {
                let mut rng = root.substream(1).substream(r as u64).rng();
                let labels: Vec<usize> = preds.iter_rows().map(|p| sample_categorical(p, &mut rng)).collect();
                caches.iter().map(|c| c.value(None, &labels)).collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()
    })?;

    let summaries: Vec<NullSummary> = args
        .estimators
        .iter()
        .enumerate()
        .map(|(i, e)| summarize(e.name(), draws.iter().map(|d| d[i]).collect()))
        .collect();

    create_dir(&args.out_dir)?;
    let mut samples = String::from("resample");
    for e in &args.estimators {
        samples.push(',');
        samples.push_str(e.name());
    }
    samples.push('\n');
    for (r, d) in draws.iter().enumerate() {
        samples.push_str(&r.to_string());
        for v in d {
            samples.push_str(&format!(",{v}"));
        }
        samples.push('\n');
    }
    write_text(&args.out_dir.join("samples.csv"), &samples)?;
    let mut summary = String::from("estimator,mean,sd,q95\n");
    for s in &summaries {
        summary.push_str(&format!("{},{},{},{}\n", s.estimator, s.mean, s.sd, s.q95));
        let svg = histogram(
            &format!("{} under calibrated labels", s.estimator),
            &s.values,
            30,
            &[("mean", s.mean), ("q95", s.q95)],
        );
        write_text(&args.out_dir.join(format!("null_{}.svg", s.estimator)), &svg)?;
    }
    write_text(&args.out_dir.join("summary.csv"), &summary)?;
    let config = serde_json::to_value(args).expect("arguments serialize");
    Manifest::new("null-dist", args.seed, config).write(&args.out_dir)?;
    Ok(summaries)
}

fn summarize(name: &str, values: Vec<f64>) -> NullSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    NullSummary { estimator: name.into(), mean, sd: var.sqrt(), q95: quantile_type7(&sorted, 0.95), values }
}
