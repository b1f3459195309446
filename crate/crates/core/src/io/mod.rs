//! File formats, physical-unit conversion and run configuration.

pub mod config;
pub mod dataset;
pub mod optics;
pub mod report;
pub mod scenario;

pub use config::RunConfig;
pub use dataset::{ingest, ingest_str, serialize_dataset, IngestOptions};
pub use optics::{mean_photons_to_power, power_to_mean_photons, OpticalConfig};
pub use report::{emit_report, OutputFormat, Report};
pub use scenario::{BiasScenario, ScenarioFile, SCENARIO_SCHEMA};
