//! Agent-based simulation of a dynamic contact network with adaptive
//! link-tracing sample designs and an epidemic layer.

pub mod config;
pub mod demography;
pub mod design;
pub mod effects;
pub mod engine;
pub mod epidemic;
pub mod error;
pub mod intervention;
pub mod links;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod snapshot;
pub mod space;
pub mod workflow;
pub mod world;

pub use error::{Error, Result};
