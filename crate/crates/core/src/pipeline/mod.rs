//! Data ingestion, configuration, persistence, reporting, and the CLI.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod model_io;
pub mod report;

pub use cli::cli_main;
pub use config::{load_config, ExperimentConfig, Method};
pub use dataset::{
    generate_synthetic, load_dataset, save_dataset, DataFormat, FeatureDataset,
};
pub use model_io::{load_model, save_model, ModelArtifact};
pub use report::{
    read_report_csv, render_report, write_report, ReportFormat,
};
