//! Library surface of the experiment CLI: configuration, dataset I/O,
//! pipeline orchestration, and plot emission. The `bdsg` binary is a thin
//! argument-parsing layer over these modules.

pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod svg;

pub use config::{DensityBackend, DistributionSpec, ExperimentConfig};
pub use pipeline::{run_experiment, verify_manifest, RunArtifacts, RunManifest};
