//! Flat `key = value` run configuration, scenario presets and resolution
//! into a validated [`ScenarioConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use levcool_core::params::{DEFAULT_DT, TRAP_PERIOD};
use levcool_core::steady::log_grid;
use levcool_core::{Mode, TrapParams};

use crate::error::{CliError, Result};

/// Every key accepted in a config file or as a `--key` flag.
pub const KEYS: [&str; 15] = [
    "scenario",
    "mass_kg",
    "omega_hz",
    "temperature_k",
    "eta",
    "k_tilde",
    "gamma_fb",
    "dt",
    "duration_periods",
    "seed",
    "seed_count",
    "format",
    "out",
    "mode",
    "dim",
];

/// Prefix that marks echoed settings inside a CSV output header.
pub const HEADER_CONFIG_PREFIX: &str = "# config:";

const CUSTOM_REQUIRED: [&str; 10] = [
    "mass_kg",
    "omega_hz",
    "temperature_k",
    "eta",
    "k_tilde",
    "gamma_fb",
    "dt",
    "duration_periods",
    "seed",
    "mode",
];

const GRID_POINTS: usize = 121;
const GRID_RANGE: (f64, f64) = (1e-3, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
    OracleCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Fig2,
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig5,
        Scenario::Fig6,
        Scenario::Custom,
        Scenario::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6 => "fig6",
            Scenario::Custom => "custom",
            Scenario::OracleCheck => "oracle-check",
        }
    }

    pub fn is_grid(self) -> bool {
        matches!(self, Scenario::Fig4 | Scenario::Fig6)
    }

    pub fn is_trajectory(self) -> bool {
        matches!(
            self,
            Scenario::Fig2 | Scenario::Fig3 | Scenario::Fig5 | Scenario::Custom
        )
    }

    fn preset(self) -> Vec<(&'static str, String)> {
        let mut p: Vec<(&'static str, String)> = vec![
            ("mass_kg", "1e-17".into()),
            ("omega_hz", "100".into()),
            ("seed", "0".into()),
            ("seed_count", "1".into()),
            ("format", "csv".into()),
            ("out", ".".into()),
        ];
        let dt = format!("{DEFAULT_DT:e}");
        let extra: Vec<(&'static str, &str)> = match self {
            Scenario::Fig2 => vec![
                ("temperature_k", "1e-6"),
                ("eta", "1e-3"),
                ("k_tilde", "1"),
                ("gamma_fb", "0"),
                ("dt", &dt),
                ("duration_periods", "1"),
            ],
            Scenario::Fig3 => vec![
                ("temperature_k", "0"),
                ("eta", "1e-3"),
                ("k_tilde", "1"),
                ("gamma_fb", "0"),
                ("dt", &dt),
                ("duration_periods", "5"),
            ],
            Scenario::Fig5 => vec![
                ("temperature_k", "1e-6"),
                ("eta", "0.1"),
                ("k_tilde", "1"),
                ("gamma_fb", "10"),
                ("dt", &dt),
                ("duration_periods", "2"),
            ],
            Scenario::Fig4 => vec![("temperature_k", "0"), ("gamma_fb", "0")],
            Scenario::Fig6 => vec![("temperature_k", "0"), ("gamma_fb", "10")],
            Scenario::OracleCheck => vec![
                ("temperature_k", "0"),
                ("eta", "1"),
                ("k_tilde", "0.1"),
                ("gamma_fb", "0"),
                ("dt", "1e-4"),
                ("duration_periods", "0.25"),
                ("seed", "42"),
                ("dim", "30"),
                ("format", "json"),
            ],
            Scenario::Custom => {
                p.retain(|(k, _)| !CUSTOM_REQUIRED.contains(k));
                vec![]
            }
        };
        for (k, v) in extra {
            match p.iter_mut().find(|(pk, _)| *pk == k) {
                Some(slot) => slot.1 = v.to_string(),
                None => p.push((k, v.to_string())),
            }
        }
        p
    }

    fn fixed_mode(self) -> Option<Mode> {
        match self {
            Scenario::Fig2 => Some(Mode::EstimateOnly),
            Scenario::Fig3 => Some(Mode::MeasureOnly),
            Scenario::Fig5 => Some(Mode::FullFeedback),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
            CliError::config(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::config(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::MeasureOnly => "measure-only",
        Mode::EstimateOnly => "estimate-only",
        Mode::FullFeedback => "full-feedback",
        Mode::Unconditioned => "unconditioned",
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    [
        Mode::MeasureOnly,
        Mode::EstimateOnly,
        Mode::FullFeedback,
        Mode::Unconditioned,
    ]
    .into_iter()
    .find(|m| mode_name(*m) == s)
    .ok_or_else(|| {
        CliError::config(format!(
            "unknown mode `{s}` (expected measure-only, estimate-only, full-feedback or unconditioned)"
        ))
    })
}

/// Raw settings keyed by [`KEYS`]; later writes win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings(BTreeMap<&'static str, String>);

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| CliError::config(format!("unknown key `{key}`")))?;
        let value = value.into();
        if value.is_empty() {
            return Err(CliError::config(format!("empty value for `{key}`")));
        }
        self.0.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k, v.clone());
        }
    }

    /// Entries in [`KEYS`] order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> + '_ {
        KEYS.iter().filter_map(|k| self.0.get(k).map(|v| (*k, v.as_str())))
    }

    /// Parses a config file, or the header of a previous run's CSV or JSON
    /// output.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Self::from_json_header(text);
        }
        let echoed = text.lines().any(|l| l.starts_with(HEADER_CONFIG_PREFIX));
        let mut settings = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = if echoed {
                match raw.strip_prefix(HEADER_CONFIG_PREFIX) {
                    Some(rest) => rest,
                    None => continue,
                }
            } else {
                match raw.find('#') {
                    Some(i) => &raw[..i],
                    None => raw,
                }
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            settings
                .set(key.trim(), value.trim())
                .map_err(|e| CliError::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(settings)
    }

    fn from_json_header(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        let config = doc
            .get("meta")
            .and_then(|m| m.get("config"))
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::config("JSON input has no meta.config object"))?;
        let mut settings = Settings::default();
        for (k, v) in config {
            let v = v
                .as_str()
                .ok_or_else(|| CliError::config(format!("meta.config.{k} is not a string")))?;
            settings.set(k, v)?;
        }
        Ok(settings)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

/// A fully resolved and validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub trap: TrapParams,
    /// Step in units of 1/ω.
    pub dt: f64,
    /// Duration in units of 1/ω.
    pub duration: f64,
    pub seeds: Vec<u64>,
    pub output_path: PathBuf,
    pub format: Format,
    /// Trajectory scenarios only.
    pub mode: Mode,
    /// Fock truncation for `oracle-check`.
    pub dim: usize,
    /// Efficiencies swept by grid scenarios.
    pub eta_family: Vec<f64>,
    /// Measurement strengths swept by grid scenarios.
    pub k_grid: Vec<f64>,
    echo: Settings,
}

fn number(settings: &Settings, key: &'static str) -> Result<f64> {
    let raw = settings
        .get(key)
        .ok_or_else(|| CliError::config(format!("missing `{key}`")))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| CliError::config(format!("`{key}` must be a number, got `{raw}`")))?;
    if !v.is_finite() {
        return Err(CliError::config(format!("`{key}` must be finite, got `{raw}`")));
    }
    Ok(v)
}

fn integer<T: FromStr>(settings: &Settings, key: &'static str) -> Result<T> {
    let raw = settings
        .get(key)
        .ok_or_else(|| CliError::config(format!("missing `{key}`")))?;
    raw.parse()
        .map_err(|_| CliError::config(format!("`{key}` must be a non-negative integer, got `{raw}`")))
}

fn seeds(settings: &Settings) -> Result<Vec<u64>> {
    let raw = settings.get("seed").unwrap_or("0");
    let count: usize = integer(settings, "seed_count")?;
    if count == 0 {
        return Err(CliError::config("`seed_count` must be at least 1"));
    }
    if raw.contains(',') {
        let list = raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::config(format!("bad seed `{}` in list", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if settings.contains("seed_count") && count != 1 && count != list.len() {
            return Err(CliError::config(
                "`seed_count` disagrees with the length of the `seed` list",
            ));
        }
        return Ok(list);
    }
    let base: u64 = integer(settings, "seed")?;
    (0..count as u64)
        .map(|i| {
            base.checked_add(i)
                .ok_or_else(|| CliError::config("seed range overflows u64"))
        })
        .collect()
}

impl ScenarioConfig {
    /// Applies the scenario preset under `user` and validates the result.
    pub fn resolve(user: &Settings) -> Result<Self> {
        let scenario: Scenario = user
            .get("scenario")
            .ok_or_else(|| CliError::config("`scenario` is required"))?
            .parse()?;
        if scenario == Scenario::Custom {
            let missing: Vec<_> = CUSTOM_REQUIRED.iter().filter(|k| !user.contains(k)).collect();
            if !missing.is_empty() {
                let names: Vec<_> = missing.iter().map(|k| k.to_string()).collect();
                return Err(CliError::config(format!(
                    "custom scenario needs explicit {}",
                    names.join(", ")
                )));
            }
        }
        if user.contains("mode") && scenario != Scenario::Custom {
            return Err(CliError::config(format!("`mode` is fixed by scenario {scenario}")));
        }
        if user.contains("dim") && scenario != Scenario::OracleCheck {
            return Err(CliError::config("`dim` only applies to oracle-check"));
        }

        let mut eff = Settings::default();
        for (k, v) in scenario.preset() {
            eff.set(k, v)?;
        }
        eff.overlay(user);

        let format: Format = eff.get("format").unwrap_or("csv").parse()?;
        if scenario == Scenario::OracleCheck && format != Format::Json {
            return Err(CliError::config("oracle-check writes JSON only"));
        }
        let omega = 2.0 * std::f64::consts::PI * number(&eff, "omega_hz")?;
        let (eta_family, k_grid) = if scenario.is_grid() {
            let etas = match eff.get("eta") {
                Some(_) => vec![number(&eff, "eta")?],
                None if scenario == Scenario::Fig4 => vec![1.0, 0.15],
                None => vec![0.05, 0.1, 0.2, 0.5, 1.0],
            };
            let ks = match eff.get("k_tilde") {
                Some(_) => vec![number(&eff, "k_tilde")?],
                None => log_grid(GRID_RANGE.0, GRID_RANGE.1, GRID_POINTS),
            };
            (etas, ks)
        } else {
            (vec![number(&eff, "eta")?], vec![number(&eff, "k_tilde")?])
        };
        let trap = TrapParams {
            mass: number(&eff, "mass_kg")?,
            omega,
            temperature: number(&eff, "temperature_k")?,
            eta: eta_family[0],
            k_tilde: k_grid[0],
            gamma_fb: number(&eff, "gamma_fb")?,
        };
        trap.validate()?;

        let (dt, duration) = if scenario.is_grid() {
            (0.0, 0.0)
        } else {
            let dt = number(&eff, "dt")?;
            let periods = number(&eff, "duration_periods")?;
            if !(dt > 0.0) {
                return Err(CliError::config("`dt` must be positive"));
            }
            if !(periods > 0.0) {
                return Err(CliError::config("`duration_periods` must be positive"));
            }
            (dt, periods * TRAP_PERIOD)
        };
        let mode = match (scenario.fixed_mode(), scenario) {
            (Some(m), _) => m,
            (None, Scenario::Custom) => parse_mode(eff.get("mode").unwrap_or_default())?,
            _ => Mode::MeasureOnly,
        };
        let dim = if scenario == Scenario::OracleCheck {
            integer(&eff, "dim")?
        } else {
            0
        };

        let seeds = seeds(&eff)?;
        if seeds.len() > 1 && !scenario.is_trajectory() {
            return Err(CliError::config(format!("{scenario} takes a single seed")));
        }
        let mut echo = eff.clone();
        echo.0.remove("out");
        Ok(Self {
            scenario,
            trap,
            dt,
            duration,
            seeds,
            output_path: PathBuf::from(eff.get("out").unwrap_or(".")),
            format,
            mode,
            dim,
            eta_family,
            k_grid,
            echo,
        })
    }

    pub fn duration_periods(&self) -> f64 {
        self.duration / TRAP_PERIOD
    }

    /// The effective settings without the output location; feeding them back
    /// through [`ScenarioConfig::resolve`] reproduces this run.
    pub fn settings(&self) -> &Settings {
        &self.echo
    }
}
