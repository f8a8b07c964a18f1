//! File formats, the worker pool, reports and the command-line front end for
//! [`progmesh_core`].

pub mod config;
pub mod dump;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pool;
pub mod runner;
pub mod topology;

pub use error::{Error, Result};
