//! Analytic gradients against central finite differences.

use credal_core::datagen::{generate, Case, ScenarioSpec};
use credal_core::metalearner::combined_loss;
use credal_core::random::{sample_categorical, sample_dirichlet};
use credal_core::{CalEstimatorKind, CredalDataset, Matrix, RngStream, ScoringRule, TrainConfig, WeightNet};
use rand::Rng;

const STEP: f64 = 1e-5;

fn kinds() -> [CalEstimatorKind; 6] {
    [
        CalEstimatorKind::Brier,
        CalEstimatorKind::LogLoss,
        CalEstimatorKind::Ce2Kde { bandwidth: 0.2 },
        CalEstimatorKind::CeKlKde { bandwidth: 0.2 },
        CalEstimatorKind::CeKernel { scale: 0.5 },
        CalEstimatorKind::CeMmd { scale: 0.4 },
    ]
}

/// Predictions kept away from the simplex boundary so the step never leaves it.
fn random_case(n: usize, k: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = RngStream::from_seed(seed).rng();
    let alpha = vec![3.0; k];
    let rows: Vec<Vec<f64>> = (0..n).map(|_| sample_dirichlet(&alpha, &mut rng).unwrap().into_vec()).collect();
    let labels = rows.iter().map(|r| sample_categorical(r, &mut rng)).collect();
    (Matrix::from_rows(&rows).unwrap(), labels)
}

/// `|a - b|_2 / |b|_2`, with a floor on the denominator for vanishing gradients.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

fn estimator_gradient_error(kind: CalEstimatorKind, seed: u64) -> f64 {
    let (preds, labels) = random_case(32, 3, seed);
    let analytic = kind.evaluate(&preds, &labels, true).unwrap().gradient.unwrap();
    let mut numeric = vec![0.0; preds.as_slice().len()];
    for (e, slot) in numeric.iter_mut().enumerate() {
        let mut plus = preds.clone();
        plus.as_mut_slice()[e] += STEP;
        let mut minus = preds.clone();
        minus.as_mut_slice()[e] -= STEP;
        let fp = kind.evaluate(&plus, &labels, false).unwrap().value;
        let fm = kind.evaluate(&minus, &labels, false).unwrap().value;
        *slot = (fp - fm) / (2.0 * STEP);
    }
    relative_error(analytic.as_slice(), &numeric)
}

fn random_net(d: usize, hidden: &[usize], m: usize, seed: u64) -> WeightNet {
    let mut net = WeightNet::with_hidden(d, hidden, m, RngStream::from_seed(seed)).unwrap();
    let mut rng = RngStream::from_seed(seed).substream(9).rng();
    let params: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-0.8..0.8)).collect();
    net.set_parameters(&params).unwrap();
    net
}

fn loss_gradient_error(net: &WeightNet, data: &CredalDataset, config: &TrainConfig) -> f64 {
    let rows: Vec<usize> = (0..data.n()).collect();
    let (_, grad) = combined_loss(net, data, &rows, config, true).unwrap();
    let grad = grad.unwrap();
    let params = net.parameters();
    let mut numeric = vec![0.0; params.len()];
    let mut probe = net.clone();
    for (p, slot) in numeric.iter_mut().enumerate() {
        let mut q = params.clone();
        q[p] += STEP;
        probe.set_parameters(&q).unwrap();
        let fp = combined_loss(&probe, data, &rows, config, false).unwrap().0;
        q[p] -= 2.0 * STEP;
        probe.set_parameters(&q).unwrap();
        let fm = combined_loss(&probe, data, &rows, config, false).unwrap().0;
        *slot = (fp - fm) / (2.0 * STEP);
    }
    relative_error(&grad, &numeric)
}

fn combined_config(kind: CalEstimatorKind, rule: ScoringRule) -> TrainConfig {
    let mut config = TrainConfig::synthetic(kind, 0);
    config.scoring_rule = rule;
    config.gamma = 0.5;
    config
}

#[test]
fn estimator_gradients_match_finite_differences() {
    for kind in kinds() {
        for seed in 0..20 {
            let err = estimator_gradient_error(kind, seed);
            assert!(err < 1e-4, "{kind:?} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn combined_loss_gradient_on_tiny_net() {
    let (data, _) = generate(&ScenarioSpec::multiclass(Case::H02, 32, 3, 3, 5)).unwrap();
    for kind in kinds() {
        let rule = ScoringRule::paired_with(&kind);
        let net = random_net(data.d(), &[4], data.m(), 17);
        let err = loss_gradient_error(&net, &data, &combined_config(kind, rule));
        assert!(err < 1e-3, "{kind:?}: relative error {err:e}");
    }
}

#[test]
fn combined_loss_gradient_on_default_architecture() {
    for seed in 0..5 {
        let (data, _) = generate(&ScenarioSpec::multiclass(Case::H11, 32, 3, 3, seed)).unwrap();
        for rule in [ScoringRule::Brier, ScoringRule::LogLoss] {
            let kind = CalEstimatorKind::Ce2Kde { bandwidth: 0.1 };
            let net = random_net(data.d(), &[16, 16, 16], data.m(), seed);
            let err = loss_gradient_error(&net, &data, &combined_config(kind, rule));
            assert!(err < 1e-3, "seed {seed} {rule:?}: relative error {err:e}");
        }
    }
}
