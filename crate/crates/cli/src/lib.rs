//! Batch orchestration of the full pipeline: ingest, preprocess, train,
//! transfer, evaluate, report, driven by a declarative config file and a
//! small set of flags. All randomness is seeded, so a (config, seed) pair
//! fully determines every output byte.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_evaluate, cmd_ingest, cmd_prepare, cmd_report, cmd_train, cmd_transfer, emit_report,
    CmdStatus, QualityRow, ReportBundle, ReportFormat, RunFlags,
};
pub use config::{parse_config, parse_config_str, ConfigError, PipelineConfig, StylePolicy};
