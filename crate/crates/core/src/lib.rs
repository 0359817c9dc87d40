//! Donor matching and multiple imputation with predictive, Mahalanobis and
//! blended distances.
//!
//! The crate is organised bottom-up:
//!
//! * [`distance`]: covariance estimation, Mahalanobis distance, the ranked and
//!   scaled blends and k-donor selection.
//! * [`linear_model`]: least-squares fit, Bayesian parameter draw, prediction.
//! * [`imputer`]: predictive mean matching with any distance family, multiple
//!   imputation and pooling.
//! * [`datagen`]: synthetic populations, outcomes and missingness mechanisms.
//! * [`harness`]: the two factorial simulation studies and their table writers.
//! * [`io`] and [`config`]: CSV schemas and the key-value run configuration.

pub mod config;
pub mod datagen;
pub mod distance;
pub mod error;
pub mod harness;
pub mod imputer;
pub mod io;
pub mod linear_model;
pub mod rng;

pub use distance::{BlendFamily, BlendSpec, CovarianceEstimate, DistanceKind, DistanceVector};
pub use error::{Error, Result};
pub use imputer::{Dataset, ImputationResult, PooledEstimate, PoolingMode};
pub use linear_model::{DrawnModel, OlsFit};
