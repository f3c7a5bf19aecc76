//! Sampling behaviour of the estimators on calibrated predictors.

use credal_core::estimators::{brier_score, ce2_kde, cek_unbiased, cemmd, median_l1_distance, median_l2_distance};
use credal_core::random::{sample_categorical, sample_dirichlet};
use credal_core::{Matrix, RngStream, SimRng};

fn dirichlet_preds(n: usize, k: usize, rng: &mut SimRng) -> Matrix {
    let alpha = vec![1.0; k];
    let rows: Vec<Vec<f64>> = (0..n).map(|_| sample_dirichlet(&alpha, rng).unwrap().into_vec()).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn resample_labels(preds: &Matrix, rng: &mut SimRng) -> Vec<usize> {
    preds.iter_rows().map(|r| sample_categorical(r, rng)).collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn kernel_estimators_are_centred_under_calibration() {
    let mut rng = RngStream::from_seed(11).rng();
    let preds = dirichlet_preds(1000, 3, &mut rng);
    let l1 = median_l1_distance(&preds);
    let l2 = median_l2_distance(&preds);
    let (mut cek, mut mmd) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let labels = resample_labels(&preds, &mut rng);
        cek.push(cek_unbiased(&preds, &labels, l1, false).unwrap().value);
        mmd.push(cemmd(&preds, &labels, l2, false).unwrap().value);
    }
    for (name, xs) in [("cek", &cek), ("mmd", &mmd)] {
        let (mean, se) = mean_and_se(xs);
        assert!(mean.abs() <= 2.0 * se, "{name}: mean {mean:e}, se {se:e}");
        assert!(xs.iter().any(|&v| v < 0.0), "{name}: no negative draw");
    }
}

#[test]
fn brier_dominates_calibration_term() {
    for seed in 0..10 {
        let mut rng = RngStream::from_seed(seed).rng();
        let preds = dirichlet_preds(500, 3, &mut rng);
        let labels = resample_labels(&preds, &mut rng);
        let brier = brier_score(&preds, &labels, false).unwrap().value;
        let ce = ce2_kde(&preds, &labels, 0.01, false).unwrap().value;
        assert!(brier >= ce * ce - 0.05, "seed {seed}: brier {brier}, ce2 {ce}");
    }
}

/// Three equally likely inputs with a deterministic label. Both the
/// marginal predictor and the Bayes predictor are calibrated.
#[test]
fn two_distinct_predictors_are_calibrated() {
    let mut rng = RngStream::from_seed(5).rng();
    let xs: Vec<usize> = (0..2000).map(|_| sample_categorical(&[1.0 / 3.0; 3], &mut rng)).collect();
    let labels = xs.clone();
    let marginal = Matrix::from_rows(&vec![[1.0 / 3.0; 3]; xs.len()]).unwrap();
    let bayes_rows: Vec<[f64; 3]> = xs
        .iter()
        .map(|&x| {
            let mut r = [0.0; 3];
            r[x] = 1.0;
            r
        })
        .collect();
    let bayes = Matrix::from_rows(&bayes_rows).unwrap();
    assert_ne!(marginal, bayes);
    for h in [0.01, 0.1] {
        let a = ce2_kde(&marginal, &labels, h, false).unwrap().value;
        let b = ce2_kde(&bayes, &labels, h, false).unwrap().value;
        assert!(a <= 0.05 && b <= 0.05, "h {h}: marginal {a}, bayes {b}");
    }
}
