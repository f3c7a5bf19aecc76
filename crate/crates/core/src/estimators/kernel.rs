//! Pairwise kernel calibration errors.
//!
//! Both estimators are unbiased U-statistics of the squared error and can be
//! negative; they are used without taking a square root.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::simplex::Matrix;

use super::{check_inputs, CalEstimate};

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("kernel scale {scale} must be positive")))
    }
}

/// Residual `e_y - f` of one instance.
#[inline]
fn residual(f: &[f64], y: usize, out: &mut [f64]) {
    for (c, (o, &v)) in out.iter_mut().zip(f).enumerate() {
        *o = if c == y { 1.0 } else { 0.0 } - v;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unbiased linear-time kernel calibration error
/// `(1/P) sum_p (e_{y_a} - f_a)^T kappa(f_a, f_b) I (e_{y_b} - f_b)` over the
/// consecutive pairs `(a, b) = (2p, 2p + 1)`, with the Laplacian kernel
/// `kappa(p, q) = exp(-|p - q|_1 / scale)`.
pub fn cek_unbiased(preds: &Matrix, labels: &[usize], scale: f64, with_gradient: bool) -> Result<CalEstimate> {
    check_inputs(preds, labels, 2)?;
    check_scale(scale)?;
    let k = preds.cols();
    let pairs = preds.rows() / 2;
    let inv_p = 1.0 / pairs as f64;
    let mut grad = with_gradient.then(|| Matrix::zeros(preds.rows(), k));
    let (mut ra, mut rb) = (alloc::vec![0.0; k], alloc::vec![0.0; k]);
    let mut value = 0.0;
    for p in 0..pairs {
        let (a, b) = (2 * p, 2 * p + 1);
        let (fa, fb) = (preds.row(a), preds.row(b));
        residual(fa, labels[a], &mut ra);
        residual(fb, labels[b], &mut rb);
        let l1: f64 = fa.iter().zip(fb).map(|(x, y)| (x - y).abs()).sum();
        let kappa = libm::exp(-l1 / scale);
        let inner = dot(&ra, &rb);
        value += kappa * inner;
        if let Some(g) = grad.as_mut() {
            for c in 0..k {
                let sign = (fa[c] - fb[c]).signum() * if fa[c] == fb[c] { 0.0 } else { 1.0 };
                let dk = -kappa * sign / scale;
                let ga = -kappa * rb[c] + inner * dk;
                let gb = -kappa * ra[c] - inner * dk;
                g.set(a, c, g.get(a, c) + inv_p * ga);
                g.set(b, c, g.get(b, c) + inv_p * gb);
            }
        }
    }
    Ok(CalEstimate::new(value * inv_p, grad))
}

/// Unbiased squared MMD calibration error
/// `1/(N(N-1)) sum_{i != j} h_ij` with the joint kernel
/// `k((y, z), (y', z')) = 1[y = y'] exp(-|z - z'|^2 / (2 scale^2))`, `z_i = q_i = f(x_i)`.
///
/// Summing `h_ij + h_ji` gives `2 kappa_ij <e_{y_i} - f_i, e_{y_j} - f_j>`, which is
/// what the loop evaluates.
pub fn cemmd(preds: &Matrix, labels: &[usize], scale: f64, with_gradient: bool) -> Result<CalEstimate> {
    check_inputs(preds, labels, 2)?;
    check_scale(scale)?;
    let n = preds.rows();
    let k = preds.cols();
    let norm = 2.0 / (n as f64 * (n - 1) as f64);
    let inv_two_s2 = 1.0 / (2.0 * scale * scale);
    let inv_s2 = 1.0 / (scale * scale);
    let mut residuals = alloc::vec![0.0; n * k];
    for i in 0..n {
        residual(preds.row(i), labels[i], &mut residuals[i * k..(i + 1) * k]);
    }
    let mut grad = with_gradient.then(|| Matrix::zeros(n, k));
    let mut value = 0.0;
    for i in 0..n {
        let fi = preds.row(i);
        let ri = &residuals[i * k..(i + 1) * k];
        let mut row_sum = 0.0;
        for j in (i + 1)..n {
            let fj = preds.row(j);
            let rj = &residuals[j * k..(j + 1) * k];
            let d2: f64 = fi.iter().zip(fj).map(|(a, b)| (a - b) * (a - b)).sum();
            let kappa = libm::exp(-d2 * inv_two_s2);
            let inner = dot(ri, rj);
            row_sum += kappa * inner;
            if let Some(g) = grad.as_mut() {
                for c in 0..k {
                    let diff = fi[c] - fj[c];
                    let gi = -kappa * rj[c] - inner * kappa * diff * inv_s2;
                    let gj = -kappa * ri[c] + inner * kappa * diff * inv_s2;
                    g.set(i, c, g.get(i, c) + norm * gi);
                    g.set(j, c, g.get(j, c) + norm * gj);
                }
            }
        }
        value += row_sum;
    }
    Ok(CalEstimate::new(value * norm, grad))
}

fn median(mut v: Vec<f64>, fallback: f64) -> f64 {
    if v.is_empty() {
        return fallback;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if m > 0.0 && m.is_finite() {
        m
    } else {
        fallback
    }
}

fn pairwise(preds: &Matrix, dist: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let n = preds.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(dist(preds.row(i), preds.row(j)));
        }
    }
    out
}

/// Median pairwise L1 distance between predictions (1.0 when degenerate).
pub fn median_l1_distance(preds: &Matrix) -> f64 {
    median(pairwise(preds, |a, b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()), 1.0)
}

/// Median pairwise L2 distance between predictions (1.0 when degenerate).
pub fn median_l2_distance(preds: &Matrix) -> f64 {
    median(pairwise(preds, |a, b| libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())), 1.0)
}
