//! Batch harness for the roundabout simulator: configuration files, seeded
//! campaigns and summary reports.

pub mod campaign;
pub mod config;
pub mod report;

pub use campaign::{run_campaign, CampaignError, CampaignOutcome, RunFailure};
pub use config::{parse_config, CampaignRow, ConfigError, ExperimentConfig};
pub use report::{summarize, SummaryReport, SummaryRow};

/// Environment variable that replaces the configured base seed.
pub const SEED_ENV: &str = "ROUNDABOUT_SIM_SEED";

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod guide {}
