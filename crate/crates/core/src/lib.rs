//! Basis-function and correlation-matrix models of autocorrelation.
//!
//! The crate builds correlation matrices (AR(1), Gaussian, exponential),
//! the basis expansions that reproduce them (eigen, kernel, grouping,
//! predictive-process), Gaussian linear mixed models that can be written in
//! either first-order (basis in the mean) or second-order (correlation in
//! the covariance) form, and a Gibbs sampler for spatial probit regression.
//!
//! ```
//! use autocorr_basis::corr::{corr_matrix, Coordinates, CorrelationModel, Family};
//! use autocorr_basis::basis::{eigen_basis, gram};
//!
//! let t = Coordinates::from_1d(&[1.0, 2.0, 3.0])?;
//! let r = corr_matrix(&t, &CorrelationModel::new(Family::Ar1, 0.5)?);
//! let z = eigen_basis(&r)?;
//! assert!((gram(&z).matrix() - r.matrix()).amax() < 1e-12);
//! # Ok::<(), autocorr_basis::Error>(())
//! ```

pub mod basis;
pub mod cli;
pub mod corr;
pub mod diagnose;
pub mod error;
pub mod lmm;
pub mod numkernel;
mod optimize;
pub mod probit;

pub use error::{Error, Result};
