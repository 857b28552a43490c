//! Desk-scale laboratory for the all-or-nothing phase transition in sparse
//! linear regression with binary k-sparse signals.
//!
//! Everything is exact where enumeration over the C(p, k) supports is
//! affordable, and Monte Carlo with batch-means standard errors otherwise.

pub mod bounds;
pub mod combinatorics;
pub mod detection;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod model;
pub mod numeric;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{Instance, Matrix, ModelParams, Origin, Seed, SupportVector};
pub use numeric::Estimate;
