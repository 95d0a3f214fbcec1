//! Consensus+innovations Kalman filtering for distributed estimation of a
//! time-varying random field over a sparse network of agents.
//!
//! The crate covers the whole offline/online pipeline:
//!
//! * [`model`]: the dynamics, sensing and communication model, its validation
//!   and a seeded generator for benchmark models.
//! * [`pseudo`]: the pseudo-state transformation `y = G x` that the agents
//!   estimate collaboratively.
//! * [`covgain`]: the coupled error-covariance recursion and the per-step
//!   minimum-MSE gain design.
//! * [`filter`]: ground-truth simulation, the per-agent online filter and the
//!   centralized Kalman filter used as a benchmark.
//! * [`capacity`]: stability checks of the error dynamics and a lower bound
//!   on the tracking capacity.
//! * [`harness`]: Monte-Carlo evaluation and result export.
//! * [`cli`]: the `cikf` command-line front end.

pub mod block;
pub mod capacity;
pub mod cli;
pub mod covgain;
pub mod error;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod pseudo;

pub use error::{Error, Result};

/// Artifact version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
