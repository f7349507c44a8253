//! Abstract value iteration for hierarchical control in continuous navigation tasks.

pub mod aavi;
pub mod abstraction;
pub mod avi;
pub mod env;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
