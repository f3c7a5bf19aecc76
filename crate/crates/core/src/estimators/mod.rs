//! Proper scoring rules and differentiable calibration-error estimators.
//!
//! Every estimator maps an `N x K` prediction matrix and `N` labels to a
//! [`CalEstimate`]: the value and, on request, the gradient with respect to
//! each prediction entry. Predictions are treated as free coordinates when
//! differentiating, so the gradient is exact for perturbations that leave the
//! simplex as well.
//!
//! | Kind | Value |
//! |------|-------|
//! | `Brier` | `(1/N) sum_i |f_i - e_{y_i}|^2` |
//! | `LogLoss` | `-(1/N) sum_i log f_{i,y_i}` |
//! | `CE2_KDE` | L2 calibration error with a Dirichlet-kernel estimate of `E[y | f]` |
//! | `CEKL_KDE` | KL calibration error with the same conditional-mean estimate |
//! | `CEK_Kernel` | unbiased pairwise kernel calibration error (squared, may be negative) |
//! | `CEMMD` | unbiased MMD calibration error (squared, may be negative) |

mod cache;
mod kde;
mod kernel;
mod scoring;

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::Matrix;

pub use cache::{EstimatorCache, MAX_CACHED_ROWS};
pub use kde::{
    ce2_kde, cekl_kde, kde_conditional_mean, select_bandwidth, BandwidthSelection, ConditionalMean,
    DEFAULT_BANDWIDTH_GRID,
};
pub use kernel::{cek_unbiased, cemmd, median_l1_distance, median_l2_distance};
pub use scoring::{brier_score, log_loss};

/// Arguments of `log` are clamped from below at this value.
pub const LOG_CLAMP: f64 = 1e-12;

/// Value of an estimator and, optionally, its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct CalEstimate {
    pub value: f64,
    /// `d value / d preds[i][k]`, same shape as the prediction matrix.
    pub gradient: Option<Matrix>,
    /// Instances whose kernel weights all underflowed and fell back to the
    /// global label frequency (KDE kinds only).
    pub fallback_rows: usize,
}

impl CalEstimate {
    pub(crate) fn new(value: f64, gradient: Option<Matrix>) -> Self {
        Self { value, gradient, fallback_rows: 0 }
    }
}

/// Calibration-error estimator together with its smoothing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CalEstimatorKind {
    Brier,
    LogLoss,
    #[serde(rename = "CE2_KDE")]
    Ce2Kde {
        bandwidth: f64,
    },
    #[serde(rename = "CEKL_KDE")]
    CeKlKde {
        bandwidth: f64,
    },
    #[serde(rename = "CEK_Kernel")]
    CeKernel {
        scale: f64,
    },
    #[serde(rename = "CEMMD")]
    CeMmd {
        scale: f64,
    },
}

impl CalEstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Brier => "Brier",
            Self::LogLoss => "LogLoss",
            Self::Ce2Kde { .. } => "CE2_KDE",
            Self::CeKlKde { .. } => "CEKL_KDE",
            Self::CeKernel { .. } => "CEK_Kernel",
            Self::CeMmd { .. } => "CEMMD",
        }
    }

    /// Kinds that estimate from a population of points rather than per instance.
    pub fn is_population(&self) -> bool {
        !matches!(self, Self::Brier | Self::LogLoss)
    }

    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            Self::Brier | Self::LogLoss => return Ok(()),
            Self::Ce2Kde { bandwidth } | Self::CeKlKde { bandwidth } => bandwidth,
            Self::CeKernel { scale } | Self::CeMmd { scale } => scale,
        };
        if p.is_finite() && p > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("{} parameter {p} must be positive", self.name())))
        }
    }

    /// Estimator value (and gradient when `with_gradient`).
    pub fn evaluate(&self, preds: &Matrix, labels: &[usize], with_gradient: bool) -> Result<CalEstimate> {
        self.validate()?;
        match *self {
            Self::Brier => brier_score(preds, labels, with_gradient),
            Self::LogLoss => log_loss(preds, labels, with_gradient),
            Self::Ce2Kde { bandwidth } => ce2_kde(preds, labels, bandwidth, with_gradient),
            Self::CeKlKde { bandwidth } => cekl_kde(preds, labels, bandwidth, with_gradient),
            Self::CeKernel { scale } => cek_unbiased(preds, labels, scale, with_gradient),
            Self::CeMmd { scale } => cemmd(preds, labels, scale, with_gradient),
        }
    }

    /// Short label such as `CE2_KDE(h=0.05)`.
    pub fn label(&self) -> String {
        match *self {
            Self::Ce2Kde { bandwidth } | Self::CeKlKde { bandwidth } => {
                format!("{}(h={bandwidth})", self.name())
            }
            Self::CeKernel { scale } | Self::CeMmd { scale } => {
                format!("{}(s={scale})", self.name())
            }
            _ => String::from(self.name()),
        }
    }
}

/// Proper scoring rule used as the data-fit term of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoringRule {
    Brier,
    LogLoss,
}

impl ScoringRule {
    /// Default pairing: log loss with the KL calibration error, Brier otherwise.
    pub fn paired_with(estimator: &CalEstimatorKind) -> Self {
        match estimator {
            CalEstimatorKind::CeKlKde { .. } | CalEstimatorKind::LogLoss => Self::LogLoss,
            _ => Self::Brier,
        }
    }

    pub fn evaluate(&self, preds: &Matrix, labels: &[usize], with_gradient: bool) -> Result<CalEstimate> {
        match self {
            Self::Brier => brier_score(preds, labels, with_gradient),
            Self::LogLoss => log_loss(preds, labels, with_gradient),
        }
    }
}

pub(crate) fn check_inputs(preds: &Matrix, labels: &[usize], min_n: usize) -> Result<()> {
    check_labels(labels, preds.cols(), preds.rows(), min_n)
}

/// Checks `rows` labels against `K` classes and the estimator's minimum size.
pub(crate) fn check_labels(labels: &[usize], k: usize, rows: usize, min_n: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::dim("labels", rows, labels.len()));
    }
    if rows < min_n.max(1) {
        return Err(Error::Domain(format!("estimator needs at least {} instances, got {rows}", min_n.max(1))));
    }
    if k < 2 {
        return Err(Error::Domain(format!("K={k} < 2")));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Domain(format!("label {y} not below K={k}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamped_ln(x: f64) -> f64 {
    libm::log(x.max(LOG_CLAMP))
}
