//! Label-independent parts of the estimators, precomputed once per prediction
//! matrix so that many label draws (bootstrap rounds) can be scored cheaply.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::simplex::Matrix;

use super::{clamped_ln, CalEstimatorKind};

/// Largest `N` for which the `N x N` tables are kept; bigger inputs are
/// re-evaluated from scratch on every call.
pub const MAX_CACHED_ROWS: usize = 6000;

/// An estimator bound to a fixed prediction matrix.
///
/// [`EstimatorCache::value`] scores labels for a selection of rows, possibly
/// with repeats, and agrees with [`CalEstimatorKind::evaluate`] on the
/// selected rows up to rounding.
#[derive(Debug, Clone)]
pub struct EstimatorCache {
    kind: CalEstimatorKind,
    preds: Matrix,
    table: Table,
}

#[derive(Debug, Clone)]
enum Table {
    None,
    /// Row `j`, column `i`: `exp(s_ij - s_jj)` with the kernel score of
    /// neighbour `i` for centre `j`. Since `s_jj` is the row maximum every
    /// entry lies in `(0, 1]`.
    Kde {
        log_preds: Vec<f64>,
        weights: Vec<f64>,
        inv_h: f64,
    },
    /// Symmetric RBF kernel between predictions.
    Mmd {
        kappa: Vec<f64>,
    },
}

impl EstimatorCache {
    pub fn new(kind: CalEstimatorKind, preds: &Matrix) -> Result<Self> {
        Self::build(kind, preds, preds.rows() <= MAX_CACHED_ROWS)
    }

    /// Binds the estimator without precomputing anything.
    pub fn uncached(kind: CalEstimatorKind, preds: &Matrix) -> Result<Self> {
        Self::build(kind, preds, false)
    }

    /// Bytes of precomputed tables [`EstimatorCache::new`] would hold for `n` rows.
    pub fn table_bytes(kind: &CalEstimatorKind, n: usize) -> usize {
        match kind {
            CalEstimatorKind::Ce2Kde { .. } | CalEstimatorKind::CeKlKde { .. } | CalEstimatorKind::CeMmd { .. }
                if n <= MAX_CACHED_ROWS =>
            {
                n * n * core::mem::size_of::<f64>()
            }
            _ => 0,
        }
    }

    fn build(kind: CalEstimatorKind, preds: &Matrix, tabulate: bool) -> Result<Self> {
        kind.validate()?;
        if preds.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite prediction entry".into()));
        }
        let n = preds.rows();
        let k = preds.cols();
        let table = if !tabulate {
            Table::None
        } else {
            match kind {
                CalEstimatorKind::Ce2Kde { bandwidth } | CalEstimatorKind::CeKlKde { bandwidth } => {
                    let inv_h = 1.0 / bandwidth;
                    let log_preds: Vec<f64> = preds.as_slice().iter().map(|&v| clamped_ln(v)).collect();
                    let mut weights = vec![0.0; n * n];
                    for j in 0..n {
                        let fj = preds.row(j);
                        let score = |i: usize| -> f64 {
                            inv_h * fj.iter().zip(&log_preds[i * k..(i + 1) * k]).map(|(a, b)| a * b).sum::<f64>()
                        };
                        let own = score(j);
                        for (i, w) in weights[j * n..(j + 1) * n].iter_mut().enumerate() {
                            *w = if i == j { 1.0 } else { libm::exp((score(i) - own).min(0.0)) };
                        }
                    }
                    Table::Kde { log_preds, weights, inv_h }
                }
                CalEstimatorKind::CeMmd { scale } => {
                    let inv_two_s2 = 1.0 / (2.0 * scale * scale);
                    let mut kappa = vec![1.0; n * n];
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let d2: f64 = preds.row(i).iter().zip(preds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                            let v = libm::exp(-d2 * inv_two_s2);
                            kappa[i * n + j] = v;
                            kappa[j * n + i] = v;
                        }
                    }
                    Table::Mmd { kappa }
                }
                _ => Table::None,
            }
        };
        Ok(Self { kind, preds: preds.clone(), table })
    }

    pub fn kind(&self) -> &CalEstimatorKind {
        &self.kind
    }

    pub fn preds(&self) -> &Matrix {
        &self.preds
    }

    /// Estimator value on rows `idx` (all rows when `None`) with `labels[a]`
    /// the label of the `a`-th selected row.
    pub fn value(&self, idx: Option<&[usize]>, labels: &[usize]) -> Result<f64> {
        let n = self.preds.rows();
        let rows = idx.map_or(n, <[usize]>::len);
        if labels.len() != rows {
            return Err(Error::dim("labels", rows, labels.len()));
        }
        if let Some(bad) = idx.and_then(|ix| ix.iter().find(|&&i| i >= n)) {
            return Err(Error::Domain(alloc::format!("row index {bad} out of range for {n} rows")));
        }
        let all: Vec<usize>;
        let sel = match idx {
            Some(ix) => ix,
            None => {
                all = (0..n).collect();
                &all
            }
        };
        match &self.table {
            Table::None => {
                let preds = match idx {
                    Some(ix) => self.preds.select_rows(ix),
                    None => self.preds.clone(),
                };
                Ok(self.kind.evaluate(&preds, labels, false)?.value)
            }
            Table::Kde { log_preds, weights, inv_h } => self.kde_value(sel, labels, log_preds, weights, *inv_h),
            Table::Mmd { kappa } => {
                super::check_labels(labels, self.preds.cols(), rows, 2)?;
                let k = self.preds.cols();
                let mut resid = vec![0.0; rows * k];
                for (a, (&i, &y)) in sel.iter().zip(labels).enumerate() {
                    for (c, (r, &f)) in resid[a * k..(a + 1) * k].iter_mut().zip(self.preds.row(i)).enumerate() {
                        *r = if c == y { 1.0 } else { 0.0 } - f;
                    }
                }
                let mut value = 0.0;
                for a in 0..rows {
                    let row = &kappa[sel[a] * n..(sel[a] + 1) * n];
                    let ra = &resid[a * k..(a + 1) * k];
                    let mut row_sum = 0.0;
                    for (b, rb) in resid.chunks_exact(k).enumerate().skip(a + 1) {
                        let inner: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                        row_sum += row[sel[b]] * inner;
                    }
                    value += row_sum;
                }
                Ok(value * 2.0 / (rows as f64 * (rows - 1) as f64))
            }
        }
    }

    fn kde_value(
        &self,
        sel: &[usize],
        labels: &[usize],
        log_preds: &[f64],
        weights: &[f64],
        inv_h: f64,
    ) -> Result<f64> {
        let k = self.preds.cols();
        let n = self.preds.rows();
        let rows = sel.len();
        super::check_labels(labels, k, rows, 2)?;
        // Selected rows grouped by label, and how often each row occurs per label.
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut counts = vec![0u32; n * k];
        for (&i, &y) in sel.iter().zip(labels) {
            groups[y].push(i);
            counts[i * k + y] += 1;
        }
        // Per centre row: label-wise weight sums over selected rows with a
        // different index. Copies of the centre itself carry weight exactly 1.
        let mut sums = vec![f64::NAN; n * k];
        let mut total_value = 0.0;
        let mut cond = vec![0.0; k];
        let mut scores = Vec::new();
        for a in 0..rows {
            let j = sel[a];
            let wrow = &weights[j * n..(j + 1) * n];
            let own = &mut sums[j * k..(j + 1) * k];
            if own[0].is_nan() {
                for (o, g) in own.iter_mut().zip(&groups) {
                    *o = sum_excluding(wrow, g, j);
                }
            }
            let mut total = 0.0;
            for (c, (v, &s)) in cond.iter_mut().zip(own.iter()).enumerate() {
                let copies = counts[j * k + c] - u32::from(labels[a] == c);
                *v = s + f64::from(copies);
                total += *v;
            }
            if total > 0.0 {
                cond.iter_mut().for_each(|v| *v /= total);
            } else {
                // Every neighbour underflowed against the centre's own score;
                // redo the row shifted by the largest neighbour score.
                let fj = self.preds.row(j);
                scores.clear();
                scores.extend(
                    sel.iter().map(|&i| {
                        inv_h * fj.iter().zip(&log_preds[i * k..(i + 1) * k]).map(|(x, y)| x * y).sum::<f64>()
                    }),
                );
                let max = (0..rows).filter(|&b| b != a).map(|b| scores[b]).fold(f64::NEG_INFINITY, f64::max);
                if max.is_finite() {
                    for b in (0..rows).filter(|&b| b != a) {
                        let w = libm::exp(scores[b] - max);
                        total += w;
                        cond[labels[b]] += w;
                    }
                    cond.iter_mut().for_each(|v| *v /= total);
                } else {
                    for b in (0..rows).filter(|&b| b != a) {
                        cond[labels[b]] += 1.0;
                    }
                    cond.iter_mut().for_each(|v| *v /= (rows - 1) as f64);
                }
            }
            let f = self.preds.row(j);
            total_value += match self.kind {
                CalEstimatorKind::Ce2Kde { .. } => cond.iter().zip(f).map(|(e, p)| (e - p) * (e - p)).sum::<f64>(),
                _ => cond
                    .iter()
                    .zip(f)
                    .filter(|(e, _)| **e > 0.0)
                    .map(|(&e, &p)| e * (libm::log(e) - clamped_ln(p)))
                    .sum::<f64>(),
            };
        }
        let mean = total_value / rows as f64;
        Ok(match self.kind {
            CalEstimatorKind::Ce2Kde { .. } => libm::sqrt(mean),
            _ => mean,
        })
    }
}

/// `sum_b w[idx[b]]` over `idx[b] != skip`, with four independent accumulators.
fn sum_excluding(w: &[f64], idx: &[usize], skip: usize) -> f64 {
    let mut acc = [0.0; 4];
    let mut chunks = idx.chunks_exact(4);
    for c in &mut chunks {
        for (a, &i) in acc.iter_mut().zip(c) {
            *a += if i == skip { 0.0 } else { w[i] };
        }
    }
    for &i in chunks.remainder() {
        acc[0] += if i == skip { 0.0 } else { w[i] };
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{sample_categorical, sample_dirichlet, RngStream};

    fn random_case(n: usize, k: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = RngStream::from_seed(seed).rng();
        let alpha = vec![1.0; k];
        let rows: Vec<Vec<f64>> = (0..n).map(|_| sample_dirichlet(&alpha, &mut rng).unwrap().into_vec()).collect();
        let labels = rows.iter().map(|r| sample_categorical(r, &mut rng)).collect();
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn agrees_with_direct_evaluation() {
        let kinds = [
            CalEstimatorKind::Ce2Kde { bandwidth: 0.1 },
            CalEstimatorKind::CeKlKde { bandwidth: 0.05 },
            CalEstimatorKind::CeMmd { scale: 0.3 },
            CalEstimatorKind::CeKernel { scale: 0.5 },
            CalEstimatorKind::Brier,
        ];
        let (preds, labels) = random_case(30, 3, 4);
        let idx: Vec<usize> = (0..30).map(|a| (a * 7 + 3) % 30 / 2).collect();
        let idx_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        for kind in kinds {
            let cache = EstimatorCache::new(kind, &preds).unwrap();
            let direct = kind.evaluate(&preds, &labels, false).unwrap().value;
            let cached = cache.value(None, &labels).unwrap();
            assert!((direct - cached).abs() < 1e-12, "{kind:?}: {direct} vs {cached}");
            let sub = preds.select_rows(&idx);
            let direct = kind.evaluate(&sub, &idx_labels, false).unwrap().value;
            let cached = cache.value(Some(&idx), &idx_labels).unwrap();
            assert!((direct - cached).abs() < 1e-12, "{kind:?} resampled: {direct} vs {cached}");
        }
    }

    #[test]
    fn underflowing_rows_match_direct() {
        let preds = Matrix::from_rows(&[[0.999, 0.001], [0.001, 0.999], [0.5, 0.5], [0.9, 0.1]]).unwrap();
        let labels = [0, 1, 1, 0];
        let kind = CalEstimatorKind::Ce2Kde { bandwidth: 1e-4 };
        let direct = kind.evaluate(&preds, &labels, false).unwrap().value;
        let cached = EstimatorCache::new(kind, &preds).unwrap().value(None, &labels).unwrap();
        assert!((direct - cached).abs() < 1e-12, "{direct} vs {cached}");
    }

    #[test]
    fn rejects_bad_input() {
        let (preds, labels) = random_case(5, 2, 1);
        let cache = EstimatorCache::new(CalEstimatorKind::Ce2Kde { bandwidth: 0.1 }, &preds).unwrap();
        assert!(cache.value(None, &labels[..4]).is_err());
        assert!(cache.value(Some(&[0, 9]), &[0, 1]).is_err());
        assert!(cache.value(None, &[0, 1, 2, 0, 1]).is_err());
    }
}
