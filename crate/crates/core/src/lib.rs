//! Rotated surface-code memory experiments with learned abort policies.

pub mod circuit;
pub mod dataset;
pub mod decoder;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod harness;
pub mod layout;
pub mod oracle;
pub mod predictor;
pub mod policy;
pub mod rng;
pub mod syndrome;

pub use error::{Error, Result};
