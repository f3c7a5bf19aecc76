//! Subcommand implementations. Each takes parsed arguments and writes its
//! outputs; `main` only maps errors to exit codes.

pub mod generate;
pub mod merge;
pub mod null_dist;
pub mod sampling_demo;
pub mod simulate;
pub mod test;

use std::path::Path;
use std::str::FromStr;

use credal_core::estimators::{median_l1_distance, median_l2_distance};
use credal_core::{CalEstimatorKind, Matrix, RngStream};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// KDE bandwidth used when none is given.
pub const DEFAULT_BANDWIDTH: f64 = 0.01;

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "CREDAL_CAL_THREADS";

/// Calibration estimator named on the command line; its smoothing parameter
/// is resolved against reference predictions by [`EstimatorChoice::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorChoice {
    Ce2,
    Cekl,
    Cek,
    Cemmd,
}

impl EstimatorChoice {
    pub const ALL: [EstimatorChoice; 4] = [Self::Ce2, Self::Cekl, Self::Cek, Self::Cemmd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ce2 => "ce2",
            Self::Cekl => "cekl",
            Self::Cek => "cek",
            Self::Cemmd => "cemmd",
        }
    }

    /// Fixed bandwidth for the KDE kinds; kernel scales default to the median
    /// pairwise distance of `reference`.
    pub fn resolve(self, bandwidth: f64, kernel_scale: Option<f64>, reference: &Matrix) -> CalEstimatorKind {
        match self {
            Self::Ce2 => CalEstimatorKind::Ce2Kde { bandwidth },
            Self::Cekl => CalEstimatorKind::CeKlKde { bandwidth },
            Self::Cek => {
                CalEstimatorKind::CeKernel { scale: kernel_scale.unwrap_or_else(|| median_l1_distance(reference)) }
            }
            Self::Cemmd => {
                CalEstimatorKind::CeMmd { scale: kernel_scale.unwrap_or_else(|| median_l2_distance(reference)) }
            }
        }
    }
}

impl FromStr for EstimatorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown estimator {s:?} (expected ce2, cekl, cek or cemmd)"))
    }
}

impl std::fmt::Display for EstimatorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Deterministic 64-bit seed for the node `path` below `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(RngStream::from_seed(seed), |s, &i| s.substream(i)).derive_seed()
}

/// Worker pool of `threads` workers (`None`: one per logical core), unless
/// the environment variable overrides it.
pub fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        ),
        Err(_) => None,
    };
    let n = from_env.or(threads).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Creates the directory that will hold the file `path`.
pub fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => create_dir(dir),
        _ => Ok(()),
    }
}

pub fn to_json_text<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Fraction of rows whose largest entry is at the label.
pub fn accuracy(preds: &Matrix, labels: &[usize]) -> f64 {
    let hits = preds
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| {
            let best = row.iter().enumerate().fold(0, |b, (c, &v)| if v > row[b] { c } else { b });
            best == y
        })
        .count();
    hits as f64 / labels.len().max(1) as f64
}

pub fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("alpha {alpha} outside (0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_names_round_trip() {
        for e in EstimatorChoice::ALL {
            assert_eq!(e.name().parse::<EstimatorChoice>().unwrap(), e);
        }
        assert!("ece".parse::<EstimatorChoice>().is_err());
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }

    #[test]
    fn accuracy_takes_first_maximum() {
        let p = Matrix::from_rows(&[[0.5, 0.5], [0.2, 0.8], [0.9, 0.1]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1, 1]), 2.0 / 3.0);
    }
}
