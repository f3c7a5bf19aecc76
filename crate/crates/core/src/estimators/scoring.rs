use crate::error::Result;
use crate::simplex::Matrix;

use super::{check_inputs, clamped_ln, CalEstimate, LOG_CLAMP};

/// Mean Brier score `(1/N) sum_i sum_j (f_ij - 1[y_i = j])^2`.
pub fn brier_score(preds: &Matrix, labels: &[usize], with_gradient: bool) -> Result<CalEstimate> {
    check_inputs(preds, labels, 1)?;
    let n = preds.rows() as f64;
    let mut value = 0.0;
    let mut grad = with_gradient.then(|| Matrix::zeros(preds.rows(), preds.cols()));
    for (i, (row, &y)) in preds.iter_rows().zip(labels).enumerate() {
        for (j, &f) in row.iter().enumerate() {
            let r = f - if j == y { 1.0 } else { 0.0 };
            value += r * r;
            if let Some(g) = grad.as_mut() {
                g.set(i, j, 2.0 * r / n);
            }
        }
    }
    Ok(CalEstimate::new(value / n, grad))
}

/// Mean negative log-likelihood with the argument clamped at `1e-12`.
pub fn log_loss(preds: &Matrix, labels: &[usize], with_gradient: bool) -> Result<CalEstimate> {
    check_inputs(preds, labels, 1)?;
    let n = preds.rows() as f64;
    let mut value = 0.0;
    let mut grad = with_gradient.then(|| Matrix::zeros(preds.rows(), preds.cols()));
    for (i, (row, &y)) in preds.iter_rows().zip(labels).enumerate() {
        let f = row[y];
        value -= clamped_ln(f);
        if let Some(g) = grad.as_mut() {
            if f > LOG_CLAMP {
                g.set(i, y, -1.0 / (n * f));
            }
        }
    }
    Ok(CalEstimate::new(value / n, grad))
}
