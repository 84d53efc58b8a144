//! Benchmarking support: synthetic scenes with exact ground truth and the
//! detection metrics scored against them.

pub mod dataset;
pub mod metrics;
