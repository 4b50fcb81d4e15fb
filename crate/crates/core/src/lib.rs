//! Simulation and limit-theory toolkit for queueing networks that share one
//! server through a concave weight function of the queue lengths.

pub mod cli;
pub mod error;
pub mod limits;
pub mod ode;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use rng::SeedSpec;
pub use weights::WeightFunction;
