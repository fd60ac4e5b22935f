//! Likelihood-free parameter inference with a two-stage ABC-RF-rejection
//! scheme: plain ABC rejection labels a first batch of prior draws, a random
//! forest learns which parameter regions get accepted, and a much larger batch
//! of candidates is screened by the forest before anything is simulated.
//!
//! Two forward models ship with the crate:
//!
//! - [`sir`]: a deterministic SIR compartment model integrated with RK4.
//! - [`spatial`]: a stochastic grid epidemic with logistic within-cell growth,
//!   an exponential dispersal kernel and exact thinning-based event times.
//!
//! [`stats`] holds the summary statistics used to compare simulations with
//! observations, [`forest`] the classifier and [`inference`] the orchestration.

pub mod error;
pub mod forest;
pub mod inference;
pub mod landscape;
pub mod seed;
pub mod sir;
pub mod spatial;
pub mod stats;

pub use error::{Error, Result};
