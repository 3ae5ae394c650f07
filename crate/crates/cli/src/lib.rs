//! Batch front end: reads a TOML run config, runs its tasks in order and
//! writes one CSV and one text summary per task plus `manifest.json`.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig, TaskConfig};
pub use run::{catalog_listing, run, RunOptions};
