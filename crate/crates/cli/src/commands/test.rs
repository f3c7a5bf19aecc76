//! `test`: runs the proposed test and the mean-predictor test on an ingested
//! prediction file.

use std::path::PathBuf;

use clap::Args;
use credal_core::random::permutation;
use credal_core::testkit::{run_credal_test, run_npbe_on_fixed_predictor};
use credal_core::{ScoringRule, TestConfig, TestResult, TrainConfig};
use serde::Serialize;

use super::{accuracy, check_alpha, create_parent, derive_seed, to_json_text, EstimatorChoice, DEFAULT_BANDWIDTH};
use crate::checkpoint;
use crate::error::{CliError, CliResult};
use crate::io::read_dataset;
use crate::manifest::{sidecar_path, Manifest};
use crate::sweep::write_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Brier,
    Logloss,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    /// Prediction CSV (`feat_*`, `pred_<m>_<k>`, `label` columns).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "ce2")]
    pub estimator: EstimatorChoice,
    /// Proper scoring rule of the training loss (default: log loss with
    /// cekl, Brier otherwise).
    #[arg(long, value_enum)]
    pub scoring_rule: Option<RuleArg>,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "bootstrap-iters", short = 'D', default_value_t = 100)]
    pub bootstrap_iters: usize,
    /// Share of the rows used to learn the weights; the rest is tested.
    #[arg(long, default_value_t = 0.5)]
    pub opt_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Also resample instances with replacement in every bootstrap round,
    /// not only labels.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub resample_instances: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the trained weight network here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub input: String,
    pub n_opt: usize,
    pub n_val: usize,
    pub m: usize,
    pub k: usize,
    pub estimator: credal_core::CalEstimatorKind,
    pub scoring_rule: ScoringRule,
    pub gamma: f64,
    pub opt_fraction: f64,
    pub seed: u64,
    /// Accuracy of the uniform average on the validation rows.
    pub accuracy_mean: f64,
    /// Accuracy of the learned combination on the validation rows.
    pub accuracy_combined: f64,
    pub training_epochs: usize,
    pub best_epoch: usize,
    /// Test of the learned combination.
    pub proposed: TestResult,
    /// Test of the uniform average.
    pub mean_predictor: TestResult,
}

impl TestArgs {
    fn validate(&self) -> CliResult<()> {
        check_alpha(self.alpha)?;
        if !(self.opt_fraction > 0.0 && self.opt_fraction < 1.0) {
            return Err(CliError::Usage(format!("opt-fraction {} outside (0, 1)", self.opt_fraction)));
        }
        Ok(())
    }
}

pub fn run(args: &TestArgs) -> CliResult<TestReport> {
    args.validate()?;
    let data = read_dataset(&args.input)?;
    data.require_labels().map_err(|_| CliError::Data("input has no labels".into()))?;
    let n = data.n();
    let n_opt = (args.opt_fraction * n as f64).round() as usize;
    if n_opt < 2 || n - n_opt < 2 {
        return Err(CliError::Usage(format!(
            "opt-fraction {} leaves {n_opt} of {n} rows for optimisation; both parts need 2",
            args.opt_fraction
        )));
    }
    let order = permutation(n, &mut credal_core::RngStream::from_seed(derive_seed(args.seed, &[0])).rng());
    let opt = data.subset(&order[..n_opt]);
    let val = data.subset(&order[n_opt..]);
    let labels = val.require_labels()?;

    let kind = args.estimator.resolve(args.bandwidth, args.kernel_scale, &opt.mean_predictions());
    let mut train = TrainConfig::ingested(kind, derive_seed(args.seed, &[1]));
    train.gamma = args.gamma;
    if let Some(rule) = args.scoring_rule {
        train.scoring_rule = match rule {
            RuleArg::Brier => ScoringRule::Brier,
            RuleArg::Logloss => ScoringRule::LogLoss,
        };
    }
    if let Some(v) = args.learning_rate {
        train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        train.batch_size = Some(v);
    }
    if let Some(v) = args.epochs {
        train.epochs = v;
    }
    if let Some(v) = args.patience {
        train.patience = v;
    }
    if let Some(h) = &args.hidden {
        train.hidden = h.clone();
    }
    train.validate()?;
    let cfg = TestConfig::new(args.alpha, args.bootstrap_iters, kind, derive_seed(args.seed, &[2]))?
        .with_resample_instances(args.resample_instances);

    let outcome = run_credal_test(&opt, &val, &train, &cfg)?;
    let mean = val.mean_predictions();
    let mean_result = run_npbe_on_fixed_predictor(&mean, labels, &cfg)?;
    if let Some(path) = &args.checkpoint {
        checkpoint::save(path, &outcome.net)?;
    }
    let report = TestReport {
        input: args.input.display().to_string(),
        n_opt,
        n_val: val.n(),
        m: data.m(),
        k: data.k(),
        estimator: kind,
        scoring_rule: train.scoring_rule,
        gamma: train.gamma,
        opt_fraction: args.opt_fraction,
        seed: args.seed,
        accuracy_mean: accuracy(&mean, labels),
        accuracy_combined: accuracy(&outcome.combined, labels),
        training_epochs: outcome.training.epochs_run,
        best_epoch: outcome.training.best_epoch,
        proposed: outcome.result,
        mean_predictor: mean_result,
    };
    create_parent(&args.out)?;
    write_text(&args.out, &to_json_text(&report))?;
    let config = serde_json::to_value(args).expect("arguments serialize");
    Manifest::new("test", args.seed, config).write_as(&sidecar_path(&args.out))?;
    Ok(report)
}
