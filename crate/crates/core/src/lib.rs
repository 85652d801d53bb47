//! Dirichlet regression for compositional data with bootstrap-based
//! residual diagnostics.
//!
//! The crate fits the Dirichlet logistic regression model (logit links for
//! the component means, log link for the precision), computes six
//! per-observation residuals — four bootstrap-based class residuals that
//! are asymptotically standard normal plus the two classical composite
//! residuals — and provides simulated-envelope diagnostics and the Monte
//! Carlo machinery used to validate them.
//!
//! All randomness flows through counter-based [`rng::RngStream`]s keyed by
//! replicate index, so results are bit-identical regardless of thread
//! count. Data-parallel loops (bootstrap replicates, envelope simulations,
//! study replicates) run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential iteration otherwise.

pub mod dirichlet;
pub mod envelope;
mod error;
mod exec;
mod linalg;
mod mat;
pub mod regression;
pub mod residuals;
pub mod rng;
pub mod simstudy;
pub mod special;

pub use error::{Error, Result};
pub use mat::Mat;
