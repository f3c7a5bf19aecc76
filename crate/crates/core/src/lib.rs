//! Statistical testing of calibration for credal sets of probabilistic classifiers.
//!
//! A credal set is given by the predictions of `M` ensemble members on `N`
//! instances. The crate learns an instance-dependent convex combination of the
//! members with a small feed-forward network and tests, with a consistency
//! resampling bootstrap, whether the combined predictor is calibrated in
//! distribution.
//!
//! Module map:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`simplex`] | probability vectors, datasets, convex combination, hull projection |
//! | [`random`] | reproducible RNG streams and simplex sampling |
//! | [`estimators`] | proper scoring rules and differentiable calibration-error estimators |
//! | [`metalearner`] | weight network, Adam training, constant-weight grid oracle |
//! | [`testkit`] | bootstrap calibration test and the two baselines |
//! | [`datagen`] | synthetic binary GP and multiclass Dirichlet scenarios |
//!
//! The crate is `no_std` (with `alloc`) so it can be embedded anywhere; IO,
//! file formats and the command line live in the `credal-cal` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod metalearner;
pub mod random;
pub mod simplex;
pub mod testkit;

pub use error::{Error, Result};
pub use estimators::{CalEstimate, CalEstimatorKind, ScoringRule};
pub use metalearner::{TrainConfig, WeightNet};
pub use random::{RngStream, SimRng};
pub use simplex::{CredalDataset, Matrix, ProbVector, WeightMatrix};
pub use testkit::{TestConfig, TestResult};

/// Crate version, recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
