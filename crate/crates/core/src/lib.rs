//! Outage analysis and outage-constrained beam design for K-user MIMO
//! interference channels under Gaussian CSI error.
//!
//! The crate is organized around four layers:
//!
//! - [`quadform`]: tail/CDF evaluation for Hermitian quadratic forms of
//!   non-central complex Gaussian vectors via a residue series, with a
//!   Laguerre series-fitting baseline and a Monte Carlo oracle.
//! - [`channel`]: the K-user MIMO interference channel model with
//!   Kronecker-structured CSI error; builds the per-stream quadratic-form
//!   parameters (mean, covariance, threshold).
//! - [`outage`]: per-stream outage probabilities, Chernoff bounds, decay
//!   diagnostics, and epsilon-outage rates.
//! - [`beamdesign`]: iterative interference alignment and max-SINR baselines
//!   plus the alternating sum outage-rate maximizing designer.

pub mod beamdesign;
pub mod channel;
pub mod linalg;
pub mod matio;
pub mod outage;
pub mod quadform;
pub mod rng;

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
