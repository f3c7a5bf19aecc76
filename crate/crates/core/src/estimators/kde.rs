//! Dirichlet-kernel estimates of the conditional label distribution `E[y | f(x)]`
//! and the two calibration errors built on them.
//!
//! The kernel centred at a prediction `c` is the Dirichlet density
//! `Dir(u; c / h + 1)`. Its log-normaliser only depends on the centre, so it
//! cancels in the Nadaraya-Watson ratio and the leave-one-out weights of
//! instance `j` reduce to a softmax over `i != j` of
//! `s_ij = (1/h) sum_k f_jk log f_ik`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::simplex::{Matrix, ProbVector};

use super::{check_inputs, clamped_ln, CalEstimate, LOG_CLAMP};

/// Candidate bandwidths searched by [`select_bandwidth`].
pub const DEFAULT_BANDWIDTH_GRID: [f64; 7] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0];

/// Leave-one-out conditional-mean estimate at one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMean {
    pub value: ProbVector,
    /// All kernel weights underflowed; `value` is the label frequency of the
    /// other instances.
    pub fallback: bool,
}

struct KdeFit {
    k: usize,
    /// `N x K` estimates of `E[y | f(x_j)]`.
    cond: Vec<f64>,
    /// `N x N`, row `j` holds the normalised weights `p_ij` (zero diagonal).
    weights: Option<Vec<f64>>,
    fallback: Vec<bool>,
    log_preds: Vec<f64>,
}

fn check_finite(preds: &Matrix) -> Result<()> {
    if preds.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("non-finite prediction entry".into()))
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("bandwidth {h} must be positive")))
    }
}

fn label_frequency_without(labels: &[usize], skip: usize, k: usize) -> Vec<f64> {
    let mut freq = vec![0.0; k];
    for (i, &y) in labels.iter().enumerate() {
        if i != skip {
            freq[y] += 1.0;
        }
    }
    let total = (labels.len() - 1) as f64;
    freq.iter_mut().for_each(|v| *v /= total);
    freq
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-space leave-one-out kernel scores of every `i` for centre `j`.
/// Returns the maximum score.
#[inline]
fn row_scores(fj: &[f64], log_preds: &[f64], k: usize, j: usize, inv_h: f64, buf: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (i, (li, s)) in log_preds.chunks_exact(k).zip(buf.iter_mut()).enumerate() {
        if i == j {
            *s = f64::NEG_INFINITY;
            continue;
        }
        let v = inv_h * dot(fj, li);
        *s = v;
        if v > max {
            max = v;
        }
    }
    max
}

fn fit(preds: &Matrix, labels: &[usize], h: f64, keep_weights: bool) -> Result<KdeFit> {
    check_inputs(preds, labels, 2)?;
    check_bandwidth(h)?;
    check_finite(preds)?;
    let n = preds.rows();
    let k = preds.cols();
    let inv_h = 1.0 / h;
    let log_preds: Vec<f64> = preds.as_slice().iter().map(|&v| clamped_ln(v)).collect();
    let mut cond = vec![0.0; n * k];
    let mut weights = keep_weights.then(|| vec![0.0; n * n]);
    let mut fallback = vec![false; n];
    let mut buf = vec![0.0; n];

    for j in 0..n {
        let max = row_scores(preds.row(j), &log_preds, k, j, inv_h, &mut buf);
        let out = &mut cond[j * k..(j + 1) * k];
        if !max.is_finite() {
            fallback[j] = true;
            out.copy_from_slice(&label_frequency_without(labels, j, k));
            continue;
        }
        let mut total = 0.0;
        for (i, s) in buf.iter_mut().enumerate() {
            let w = if i == j { 0.0 } else { libm::exp(*s - max) };
            *s = w;
            total += w;
            out[labels[i]] += w;
        }
        out.iter_mut().for_each(|v| *v /= total);
        if let Some(wm) = weights.as_mut() {
            for (dst, &w) in wm[j * n..(j + 1) * n].iter_mut().zip(buf.iter()) {
                *dst = w / total;
            }
        }
    }
    Ok(KdeFit { k, cond, weights, fallback, log_preds })
}

impl KdeFit {
    fn fallback_rows(&self) -> usize {
        self.fallback.iter().filter(|&&f| f).count()
    }

    /// Adds the chain-rule contribution of `d value / d cond = upstream` to `grad`.
    fn backward(&self, preds: &Matrix, labels: &[usize], h: f64, upstream: &[f64], grad: &mut Matrix) {
        let weights = self.weights.as_ref().expect("weights kept for gradient");
        let n = preds.rows();
        let k = self.k;
        let inv_h = 1.0 / h;
        for j in 0..n {
            if self.fallback[j] {
                continue;
            }
            let gj = &upstream[j * k..(j + 1) * k];
            let ej = &self.cond[j * k..(j + 1) * k];
            let centre = dot(gj, ej);
            let fj: Vec<f64> = preds.row(j).to_vec();
            let mut acc = vec![0.0; k];
            let wrow = &weights[j * n..(j + 1) * n];
            for i in 0..n {
                let p = wrow[i];
                if i == j || p == 0.0 {
                    continue;
                }
                let r = p * (gj[labels[i]] - centre) * inv_h;
                let li = &self.log_preds[i * k..(i + 1) * k];
                for (a, &l) in acc.iter_mut().zip(li) {
                    *a += r * l;
                }
                let fi = grad.row_mut(i);
                for c in 0..k {
                    let v = preds.get(i, c);
                    if v > LOG_CLAMP {
                        fi[c] += r * fj[c] / v;
                    }
                }
            }
            for (g, a) in grad.row_mut(j).iter_mut().zip(acc) {
                *g += a;
            }
        }
    }
}

/// Leave-one-out Dirichlet-kernel estimate of `E[y | f(x_at)]`.
pub fn kde_conditional_mean(preds: &Matrix, labels: &[usize], bandwidth: f64, at: usize) -> Result<ConditionalMean> {
    check_inputs(preds, labels, 2)?;
    check_bandwidth(bandwidth)?;
    check_finite(preds)?;
    if at >= preds.rows() {
        return Err(Error::dim("instance index", preds.rows(), at));
    }
    let k = preds.cols();
    let log_preds: Vec<f64> = preds.as_slice().iter().map(|&v| clamped_ln(v)).collect();
    let mut buf = vec![0.0; preds.rows()];
    let max = row_scores(preds.row(at), &log_preds, k, at, 1.0 / bandwidth, &mut buf);
    if !max.is_finite() {
        return Ok(ConditionalMean { value: ProbVector::new(label_frequency_without(labels, at, k))?, fallback: true });
    }
    let mut out = vec![0.0; k];
    let mut total = 0.0;
    for (i, &s) in buf.iter().enumerate() {
        if i != at {
            let w = libm::exp(s - max);
            total += w;
            out[labels[i]] += w;
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(ConditionalMean { value: ProbVector::new(out)?, fallback: false })
}

/// `( (1/N) sum_j |E^_j - f_j|_2^2 )^(1/2)` with the KDE conditional mean.
pub fn ce2_kde(preds: &Matrix, labels: &[usize], bandwidth: f64, with_gradient: bool) -> Result<CalEstimate> {
    let fit = fit(preds, labels, bandwidth, with_gradient)?;
    let n = preds.rows();
    let k = preds.cols();
    let sq: f64 = fit.cond.iter().zip(preds.as_slice()).map(|(e, f)| (e - f) * (e - f)).sum();
    let value = libm::sqrt(sq / n as f64);
    let gradient = with_gradient.then(|| {
        let mut grad = Matrix::zeros(n, k);
        if value > 0.0 {
            let scale = 1.0 / (n as f64 * value);
            let upstream: Vec<f64> = fit.cond.iter().zip(preds.as_slice()).map(|(e, f)| scale * (e - f)).collect();
            for (g, u) in grad.as_mut_slice().iter_mut().zip(&upstream) {
                *g -= u;
            }
            fit.backward(preds, labels, bandwidth, &upstream, &mut grad);
        }
        grad
    });
    Ok(CalEstimate { value, gradient, fallback_rows: fit.fallback_rows() })
}

/// `(1/N) sum_j <E^_j, log(E^_j / f_j)>` with `0 log 0 = 0`.
pub fn cekl_kde(preds: &Matrix, labels: &[usize], bandwidth: f64, with_gradient: bool) -> Result<CalEstimate> {
    let fit = fit(preds, labels, bandwidth, with_gradient)?;
    let n = preds.rows();
    let k = preds.cols();
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    for (&e, &f) in fit.cond.iter().zip(preds.as_slice()) {
        if e > 0.0 {
            value += e * (libm::log(e) - clamped_ln(f));
        }
    }
    value *= inv_n;
    let gradient = with_gradient.then(|| {
        let mut grad = Matrix::zeros(n, k);
        let upstream: Vec<f64> = fit
            .cond
            .iter()
            .zip(preds.as_slice())
            .map(|(&e, &f)| inv_n * (clamped_ln(e) + 1.0 - clamped_ln(f)))
            .collect();
        for ((g, &e), &f) in grad.as_mut_slice().iter_mut().zip(&fit.cond).zip(preds.as_slice()) {
            if f > LOG_CLAMP {
                *g -= inv_n * e / f;
            }
        }
        fit.backward(preds, labels, bandwidth, &upstream, &mut grad);
        grad
    });
    Ok(CalEstimate { value, gradient, fallback_rows: fit.fallback_rows() })
}

/// Bandwidth chosen by [`select_bandwidth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    /// All predictions identical; the largest grid value was returned.
    pub degenerate: bool,
    pub log_likelihood: f64,
}

fn ln_beta(alpha: &[f64]) -> f64 {
    let s: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| libm::lgamma(a)).sum::<f64>() - libm::lgamma(s)
}

/// Leave-one-out log density of the predictions under the Dirichlet KDE.
pub fn loo_log_likelihood(preds: &Matrix, bandwidth: f64) -> f64 {
    let n = preds.rows();
    let k = preds.cols();
    let inv_h = 1.0 / bandwidth;
    let log_preds: Vec<f64> = preds.as_slice().iter().map(|&v| clamped_ln(v)).collect();
    // Normaliser of the kernel centred at f_i.
    let norms: Vec<f64> = preds
        .iter_rows()
        .map(|fi| {
            let a: Vec<f64> = fi.iter().map(|&c| c * inv_h + 1.0).collect();
            ln_beta(&a)
        })
        .collect();
    let mut buf = vec![0.0; n];
    let mut total = 0.0;
    for j in 0..n {
        let lj = &log_preds[j * k..(j + 1) * k];
        let mut max = f64::NEG_INFINITY;
        for i in 0..n {
            if i == j {
                continue;
            }
            let v = inv_h * dot(preds.row(i), lj) - norms[i];
            buf[i] = v;
            max = max.max(v);
        }
        let s: f64 = (0..n).filter(|&i| i != j).map(|i| libm::exp(buf[i] - max)).sum();
        total += max + libm::log(s / (n - 1) as f64);
    }
    total
}

/// Bandwidth from `grid` maximising the leave-one-out log-likelihood of the
/// Dirichlet KDE over the predictions.
pub fn select_bandwidth(preds: &Matrix, labels: &[usize], grid: &[f64]) -> Result<BandwidthSelection> {
    check_inputs(preds, labels, 10)?;
    check_finite(preds)?;
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    for &h in grid {
        check_bandwidth(h)?;
    }
    let first = preds.row(0);
    let identical = preds.iter_rows().all(|r| r.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-12));
    if identical {
        let bandwidth = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(BandwidthSelection { bandwidth, degenerate: true, log_likelihood: f64::NAN });
    }
    let mut best = BandwidthSelection { bandwidth: grid[0], degenerate: false, log_likelihood: f64::NEG_INFINITY };
    for &h in grid {
        let ll = loo_log_likelihood(preds, h);
        if ll > best.log_likelihood {
            best.bandwidth = h;
            best.log_likelihood = ll;
        }
    }
    Ok(best)
}
