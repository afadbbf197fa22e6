//! Experiment driver support: acceptance suites, run configuration and manifests.

pub mod config;
pub mod manifest;
pub mod suites;
