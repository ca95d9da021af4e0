//! File formats: run configuration, initial profiles, trajectories, summaries and plots.

pub mod config;
pub mod profile;
pub mod summary;
pub mod svg;
pub mod trajectory;
