//! Experiment drivers: runs, comparisons, consistency checks, benchmarks.

pub mod bench;
pub mod cardinality;
pub mod cli;
pub mod compare;
pub mod config;
pub mod consistency;
pub mod run;

pub use crate::abstraction::abstraction_map;
