//! Dual-resolution vegetation landscape simulator.
//!
//! The same landscape can be run through an individual-plant engine
//! ([`fine`]) and a cohort engine ([`coarse`]); the [`harness`] compares the
//! two, checks one-step consistency of the abstraction map and benchmarks
//! them.

pub mod abstraction;
pub mod allometry;
pub mod coarse;
pub mod disturbance;
pub mod engine;
pub mod error;
pub mod fine;
pub mod harness;
pub mod model;
pub mod output;
pub mod params;
pub mod raster;
pub mod rng;

pub use error::{Error, Result};
