//! Command-line front end for `levcool-core`: scenario presets, config files
//! and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario;

use std::path::PathBuf;

pub use args::{Cli, Command, RunArgs};
pub use config::{ScenarioConfig, Settings};
pub use error::{CliError, Result};

/// Loads, merges and resolves settings, then runs the scenario on a pool of
/// `args.jobs` threads.
pub fn execute(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let mut settings = match &args.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    settings.overlay(&args.overrides()?);
    let cfg = ScenarioConfig::resolve(&settings)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let opts = scenario::RunOptions {
        per_seed: args.per_seed,
    };
    pool.install(|| scenario::run(&cfg, opts))
}
