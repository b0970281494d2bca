//! Simulation and estimation of dynamic latent-factor discrete-choice
//! demand models for multi-category retail purchase panels.
//!
//! The crate covers the full experiment pipeline:
//!
//! - [`dgp`] simulates purchase panels with price paths, category incidence
//!   and one-lag inertia;
//! - [`model`] evaluates utilities, logit probabilities, the conditional
//!   log-likelihood and its analytic gradient;
//! - [`vi`] fits mean-field Gaussian variational posteriors with
//!   reparameterized stochastic gradients;
//! - [`mixedlogit`] estimates the per-category mixed logit benchmark by
//!   maximum simulated likelihood;
//! - [`eval`] splits data, scores predictions, computes own-price
//!   elasticities and runs replication grids;
//! - [`cli`] backs the `factor-demand` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod data;
pub mod eval;
pub mod dgp;
pub mod error;
pub mod io;
pub mod mixedlogit;
pub mod model;
pub mod numeric;
pub mod params;
pub mod rng;
pub mod vi;

pub use data::{validate_dataset, Dataset, Dims, Observation, ValidationReport};
pub use dgp::{simulate, SimConfig, Simulation, TrueParams};
pub use error::{Error, Result};
pub use model::PriorSpec;
pub use params::{Block, Layout, ModelKind, ParamDraw};
