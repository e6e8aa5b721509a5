//! Principal-agent contracting when the principal observes noisy signals of
//! the agent's type and effort.
//!
//! The crate is layered: [`econ`] holds the primitives, [`bayes`] the belief
//! updates, [`contract`] and [`manipulation`] the agent and principal
//! problems, [`market`] the Monte Carlo drivers, [`metrics`] the aggregation,
//! and [`experiment`] the file-based runner used by the command-line tool.

pub mod bayes;
pub mod contract;
pub mod econ;
pub mod error;
pub mod experiment;
pub mod manipulation;
pub mod market;
pub mod metrics;
pub mod optimize;
pub mod records;
pub mod rng;

pub use error::{Error, Result};
