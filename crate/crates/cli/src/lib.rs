//! Experiment drivers behind the `wiplab` binary.

pub mod app;
pub mod config;
pub mod error;
pub mod experiments;
pub mod oracles;
pub mod report;
pub mod suite;
