//! Consistency-resampling bootstrap tests of calibration.
//!
//! The null distribution of an estimator is simulated by drawing labels from
//! the predictor's own distribution: if the predictor is calibrated, the
//! observed labels look like one more such draw. Three tests share this
//! machinery:
//!
//! * [`run_credal_test`] learns combination weights on one dataset and tests
//!   the combined predictor on another;
//! * [`run_npbe_on_fixed_predictor`] tests a given prediction matrix (for
//!   example the ensemble mean);
//! * [`run_mortier_baseline`] minimizes the estimator over randomly sampled
//!   constant weights and repeats the minimization for every bootstrap round.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CalEstimatorKind, EstimatorCache};
use crate::metalearner::{evaluate_weights, train_weight_net, TrainConfig, TrainReport, WeightNet};
use crate::random::{sample_categorical, sample_weight_simplex, RngStream};
use crate::simplex::{combine_dataset, combine_row, CredalDataset, Matrix};

/// Smallest accepted number of bootstrap rounds.
pub const MIN_BOOTSTRAP_ITERS: usize = 20;
/// Smallest accepted number of weight samples for [`run_mortier_baseline`].
pub const MIN_MORTIER_SAMPLES: usize = 100;
/// Memory allowed for precomputed estimator tables across all weight samples
/// of [`run_mortier_baseline`]; above it every evaluation starts from scratch.
pub const MORTIER_TABLE_BUDGET: usize = 512 << 20;

/// Settings shared by all bootstrap tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    /// Number of bootstrap rounds `D`.
    #[serde(rename = "D")]
    pub bootstrap_iters: usize,
    pub estimator: CalEstimatorKind,
    pub seed: u64,
    /// Draw a with-replacement instance sample in every round (`true`), or
    /// keep the instances and only redraw labels (`false`, the default).
    ///
    /// With instance resampling, duplicated rows are each other's nearest
    /// neighbours in the leave-one-out KDE and carry labels drawn from the
    /// same prediction, which shifts the null distribution of the KDE
    /// estimators away from that of the observed statistic.
    pub resample_instances: bool,
}

impl TestConfig {
    pub fn new(alpha: f64, bootstrap_iters: usize, estimator: CalEstimatorKind, seed: u64) -> Result<Self> {
        let cfg = Self { alpha, bootstrap_iters, estimator, seed, resample_instances: false };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_resample_instances(mut self, on: bool) -> Self {
        self.resample_instances = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.bootstrap_iters < MIN_BOOTSTRAP_ITERS {
            return Err(Error::Config(format!(
                "D = {} bootstrap rounds, need at least {MIN_BOOTSTRAP_ITERS}",
                self.bootstrap_iters
            )));
        }
        self.estimator.validate()
    }
}

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Type-7 `(1 - alpha)` quantile of the null samples.
    pub quantile: f64,
    pub alpha: f64,
    pub reject: bool,
    pub estimator: CalEstimatorKind,
    #[serde(rename = "D")]
    pub bootstrap_iters: usize,
    pub seed: u64,
    /// Bootstrap statistics in ascending order.
    pub null_samples: Vec<f64>,
}

impl TestResult {
    fn from_samples(statistic: f64, mut null_samples: Vec<f64>, cfg: &TestConfig) -> Result<Self> {
        if !statistic.is_finite() || null_samples.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("non-finite test statistic".into()));
        }
        null_samples.sort_by(f64::total_cmp);
        let quantile = quantile_type7(&null_samples, 1.0 - cfg.alpha);
        let at_least = null_samples.iter().filter(|&&t| t >= statistic).count();
        Ok(Self {
            statistic,
            p_value: (1 + at_least) as f64 / (null_samples.len() + 1) as f64,
            quantile,
            alpha: cfg.alpha,
            reject: statistic > quantile,
            estimator: cfg.estimator,
            bootstrap_iters: null_samples.len(),
            seed: cfg.seed,
            null_samples,
        })
    }

    /// Decision of the same test at another significance level.
    pub fn reject_at(&self, alpha: f64) -> bool {
        self.statistic > quantile_type7(&self.null_samples, 1.0 - alpha)
    }
}

/// Linear-interpolation (type 7) quantile of ascending `sorted` at level `p`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Indices and labels of bootstrap round `round`.
fn draw_round(preds: &Matrix, resample: bool, stream: RngStream, round: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream.substream(round).rng();
    let n = preds.rows();
    let idx: Vec<usize> =
        if resample { (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect() } else { (0..n).collect() };
    let labels = idx.iter().map(|&i| sample_categorical(preds.row(i), &mut rng)).collect();
    (idx, labels)
}

fn bootstrap_stream(cfg: &TestConfig) -> RngStream {
    RngStream::from_seed(cfg.seed).substream(1)
}

/// Consistency-resampling bootstrap test of a fixed predictor.
pub fn run_npbe_on_fixed_predictor(preds: &Matrix, labels: &[usize], cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let cache = EstimatorCache::new(cfg.estimator, preds)?;
    let statistic = cache.value(None, labels)?;
    let stream = bootstrap_stream(cfg);
    let mut null = Vec::with_capacity(cfg.bootstrap_iters);
    for d in 0..cfg.bootstrap_iters {
        let (idx, y) = draw_round(preds, cfg.resample_instances, stream, d as u64);
        null.push(cache.value(cfg.resample_instances.then_some(idx.as_slice()), &y)?);
    }
    TestResult::from_samples(statistic, null, cfg)
}

/// Result of [`run_credal_test`] together with the trained network.
#[derive(Debug, Clone)]
pub struct CredalTestOutcome {
    pub result: TestResult,
    pub net: WeightNet,
    pub training: TrainReport,
    /// Combined predictions `f_Lambda*` on the validation data.
    pub combined: Matrix,
}

/// Learns weights on `opt`, then tests the combined predictor on `val`.
///
/// The two datasets must not share instances; this is the caller's
/// responsibility.
pub fn run_credal_test(
    opt: &CredalDataset,
    val: &CredalDataset,
    train: &TrainConfig,
    cfg: &TestConfig,
) -> Result<CredalTestOutcome> {
    cfg.validate()?;
    if opt.m() != val.m() || opt.k() != val.k() || opt.d() != val.d() {
        return Err(Error::Domain(format!(
            "opt data (M={}, K={}, d={}) and val data (M={}, K={}, d={}) differ in shape",
            opt.m(),
            opt.k(),
            opt.d(),
            val.m(),
            val.k(),
            val.d()
        )));
    }
    opt.require_labels()?;
    let labels = val.require_labels()?;
    let (net, training) = train_weight_net(opt, train)?;
    let weights = evaluate_weights(&net, val)?;
    let combined = combine_dataset(val, &weights)?;
    let result = run_npbe_on_fixed_predictor(&combined, labels, cfg)?;
    Ok(CredalTestOutcome { result, net, training, combined })
}

/// Baseline that searches the credal set with random constant weights.
///
/// Draws `sample_count` weight vectors from the flat Dirichlet, takes the
/// smallest estimator value as statistic and repeats the minimization on
/// every bootstrap sample, whose labels are drawn from the minimizing
/// combination.
pub fn run_mortier_baseline(val: &CredalDataset, cfg: &TestConfig, sample_count: usize) -> Result<TestResult> {
    cfg.validate()?;
    let labels = val.require_labels()?;
    if val.m() == 1 {
        return run_npbe_on_fixed_predictor(&val.member(0), labels, cfg);
    }
    if sample_count < MIN_MORTIER_SAMPLES {
        return Err(Error::Config(format!("{sample_count} weight samples, need at least {MIN_MORTIER_SAMPLES}")));
    }
    let mut rng = RngStream::from_seed(cfg.seed).substream(0).rng();
    let lambdas = sample_weight_simplex(val.m(), sample_count, &mut rng)?;
    let k = val.k();
    let tabulate =
        EstimatorCache::table_bytes(&cfg.estimator, val.n()).saturating_mul(sample_count) <= MORTIER_TABLE_BUDGET;
    let combos: Vec<EstimatorCache> = lambdas
        .iter()
        .map(|w| {
            let mut out = Matrix::zeros(val.n(), k);
            for i in 0..val.n() {
                combine_row(val.instance(i), w.as_slice(), k, out.row_mut(i));
            }
            if tabulate {
                EstimatorCache::new(cfg.estimator, &out)
            } else {
                EstimatorCache::uncached(cfg.estimator, &out)
            }
        })
        .collect::<Result<_>>()?;
    let minimize = |idx: Option<&[usize]>, y: &[usize]| -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, 0);
        for (c, cache) in combos.iter().enumerate() {
            let v = cache.value(idx, y)?;
            if v < best.0 {
                best = (v, c);
            }
        }
        Ok(best)
    };
    let (statistic, arg) = minimize(None, labels)?;
    let reference = combos[arg].preds();
    let stream = bootstrap_stream(cfg);
    let mut null = Vec::with_capacity(cfg.bootstrap_iters);
    for d in 0..cfg.bootstrap_iters {
        let (idx, y) = draw_round(reference, cfg.resample_instances, stream, d as u64);
        let idx = cfg.resample_instances.then_some(idx.as_slice());
        null.push(minimize(idx, &y)?.0);
    }
    TestResult::from_samples(statistic, null, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::CalEstimatorKind as E;

    #[test]
    fn quantile_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&xs, 0.5), 3.0);
        assert_eq!(quantile_type7(&xs, 0.0), 1.0);
        assert_eq!(quantile_type7(&xs, 1.0), 5.0);
        assert!((quantile_type7(&xs, 0.95) - 4.8).abs() < 1e-12);
        assert_eq!(quantile_type7(&[-2.0, -1.0], 0.5), -1.5);
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig::new(0.0, 100, E::Brier, 0).is_err());
        assert!(TestConfig::new(1.0, 100, E::Brier, 0).is_err());
        assert!(TestConfig::new(0.05, 19, E::Brier, 0).is_err());
        assert!(TestConfig::new(0.05, 20, E::Ce2Kde { bandwidth: -1.0 }, 0).is_err());
        TestConfig::new(0.05, 20, E::Brier, 0).unwrap();
    }

    #[test]
    fn perfect_predictor_never_rejects() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let preds = Matrix::from_rows(&rows).unwrap();
        for est in [E::Ce2Kde { bandwidth: 0.02 }, E::CeKlKde { bandwidth: 0.02 }, E::CeKernel { scale: 1.0 }] {
            let cfg = TestConfig::new(0.05, 30, est, 1).unwrap();
            let r = run_npbe_on_fixed_predictor(&preds, &labels, &cfg).unwrap();
            assert_eq!(r.statistic, 0.0, "{est:?}");
            assert!(r.null_samples.iter().all(|&t| t == 0.0));
            assert!(!r.reject);
            assert!(!r.reject_at(0.99));
            assert_eq!(r.p_value, 1.0);
        }
    }

    #[test]
    fn from_samples_keeps_negatives_and_sorts() {
        let cfg = TestConfig::new(0.1, 20, E::Brier, 0).unwrap();
        let samples: Vec<f64> = (0..20).map(|i| (i as f64 - 10.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = TestResult::from_samples(3.5, samples, &cfg).unwrap();
        assert!(r.null_samples.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.null_samples[0], -10.0);
        assert_eq!(r.p_value, (1 + r.null_samples.iter().filter(|&&t| t >= 3.5).count()) as f64 / 21.0);
        assert_eq!(r.reject, 3.5 > r.quantile);
    }
}
