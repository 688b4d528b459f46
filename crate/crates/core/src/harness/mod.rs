//! Configuration, experiment drivers, and result files.

mod commands;
mod config;
mod output;

pub use commands::{
    cmd_all, cmd_correlation, cmd_downsample, cmd_ece, cmd_gradcheck, cmd_simulate, gradcheck_report, AllSummary,
    CorrelationReplica, CorrelationSummary, DownsampleRow, DownsampleSummary, EceSummary, GradcheckReport,
    SimulateSummary,
};
pub use config::{ExperimentConfig, GradcheckConfig, InputConfig, RunConfig, SEED_ENV};
pub use output::{sha256_hex, write_manifest, OutputDir};
