//! Homophily estimation from predicted node attributes.

pub mod error;
pub mod estimators;
pub mod glm;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod sampling;
pub mod simgen;

pub use error::{Error, Result};
