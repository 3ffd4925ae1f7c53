// `!(x > 0.0)` is used on purpose so that NaN lands on the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod cumulants;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod rates;
pub mod simulation;
pub mod sum;

pub use covariance::{cov, rho, CovarianceModel, IncrementCovariance, ModelKind, Perturbation, SizeCaps, TabulatedGrid};
pub use error::{Error, Result};
