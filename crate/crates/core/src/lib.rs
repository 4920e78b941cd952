//! Fairness auditing for small spiking neural networks.

pub mod bias;
pub mod deploy;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod snn;
pub mod trajectory;

pub use error::{Error, Result};
