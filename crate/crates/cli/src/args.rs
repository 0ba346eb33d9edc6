//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "levcool",
    version,
    about = "Measurement-based feedback cooling of a levitated oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its tables.
    Run(RunArgs),
}

/// Every setting can come from `--config` and be overridden by a flag of the
/// same name.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Config file: `key = value` lines, or the output of a previous run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fig2, fig3, fig4, fig5, fig6, custom or oracle-check.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Particle mass in kg.
    #[arg(long = "mass_kg")]
    pub mass_kg: Option<String>,
    /// Trap frequency in Hz (ω = 2πf).
    #[arg(long = "omega_hz")]
    pub omega_hz: Option<String>,
    /// Initial thermal temperature in K.
    #[arg(long = "temperature_k")]
    pub temperature_k: Option<String>,
    /// Detection efficiency in (0, 1].
    #[arg(long)]
    pub eta: Option<String>,
    /// Dimensionless measurement strength.
    #[arg(long = "k_tilde")]
    pub k_tilde: Option<String>,
    /// Feedback damping rate in units of ω.
    #[arg(long = "gamma_fb")]
    pub gamma_fb: Option<String>,
    /// Time step in units of 1/ω.
    #[arg(long)]
    pub dt: Option<String>,
    /// Run length in trap periods.
    #[arg(long = "duration_periods")]
    pub duration_periods: Option<String>,
    /// First seed, or a comma-separated list.
    #[arg(long)]
    pub seed: Option<String>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long = "seed_count")]
    pub seed_count: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Output directory, file, or `-` for stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// measure-only, estimate-only, full-feedback or unconditioned (custom only).
    #[arg(long)]
    pub mode: Option<String>,
    /// Fock-space dimension (oracle-check only).
    #[arg(long)]
    pub dim: Option<String>,
    /// Write each seed of an ensemble to its own file as well.
    #[arg(long)]
    pub per_seed: bool,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl RunArgs {
    pub fn overrides(&self) -> Result<Settings> {
        let pairs = [
            ("scenario", &self.scenario),
            ("mass_kg", &self.mass_kg),
            ("omega_hz", &self.omega_hz),
            ("temperature_k", &self.temperature_k),
            ("eta", &self.eta),
            ("k_tilde", &self.k_tilde),
            ("gamma_fb", &self.gamma_fb),
            ("dt", &self.dt),
            ("duration_periods", &self.duration_periods),
            ("seed", &self.seed),
            ("seed_count", &self.seed_count),
            ("format", &self.format),
            ("out", &self.out),
            ("mode", &self.mode),
            ("dim", &self.dim),
        ];
        let mut s = Settings::default();
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.trim())?;
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KEYS;

    #[test]
    fn every_key_has_a_flag() {
        let mut argv = vec!["levcool".to_string(), "run".to_string()];
        for k in KEYS {
            argv.push(format!("--{k}"));
            argv.push("v".into());
        }
        let Command::Run(args) = Cli::try_parse_from(argv).unwrap().command;
        let s = args.overrides().unwrap();
        assert_eq!(s.entries().count(), KEYS.len());
    }
}
