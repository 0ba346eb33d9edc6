//! Scenario runners: each turns a resolved config into tables on disk.

use std::path::PathBuf;

use levcool_core::dynamics::{ensemble_map, StepSample, TrajectoryRunner};
use levcool_core::oracle::compare_oracle;
use levcool_core::params::normalize_params;
use levcool_core::steady::{conditional_steady_state, cooling_landscape};
use levcool_core::{Mode, SimParams};

use crate::config::{mode_name, Format, Scenario, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::output::{write_json, write_table, Destination, Meta, OutputSet, Table};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also write every seed of an ensemble to its own file.
    pub per_seed: bool,
}

/// Runs the scenario and returns the paths written (empty for stdout).
pub fn run(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Vec<PathBuf>> {
    let dest = Destination::from_out(&cfg.output_path, cfg.format);
    if dest == Destination::Stdout && opts.per_seed {
        return Err(CliError::config("--per-seed needs a file or directory output"));
    }
    if opts.per_seed && !cfg.scenario.is_trajectory() {
        return Err(CliError::config(format!(
            "--per-seed does not apply to {}",
            cfg.scenario
        )));
    }
    if let Destination::Dir(dir) = &dest {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut outputs = OutputSet::default();
    match cfg.scenario {
        Scenario::Fig4 => run_fig4(cfg, &dest, &mut outputs)?,
        Scenario::Fig6 => run_fig6(cfg, &dest, &mut outputs)?,
        Scenario::OracleCheck => run_oracle(cfg, &dest, &mut outputs)?,
        _ if cfg.seeds.len() == 1 => run_single(cfg, &dest, &mut outputs)?,
        _ => run_ensemble(cfg, opts, &dest, &mut outputs)?,
    }
    Ok(outputs.commit())
}

fn stem(cfg: &ScenarioConfig) -> &'static str {
    cfg.scenario.name()
}

fn sim_params(cfg: &ScenarioConfig) -> Result<SimParams> {
    Ok(normalize_params(&cfg.trap, cfg.dt, cfg.duration)?)
}

fn trajectory_meta(cfg: &ScenarioConfig, sp: &SimParams, content: &str, seeds: Vec<u64>) -> Meta {
    Meta::new(cfg, content, seeds)
        .resolve("omega_rad_s", cfg.trap.omega)
        .resolve("kappa_s", sp.kappa_s)
        .resolve("eta", sp.eta)
        .resolve("gamma_s", sp.gamma_s)
        .resolve("n_th", sp.n_th)
        .resolve("dt", sp.dt)
        .resolve("duration", sp.duration)
        .resolve("n_steps", sp.n_steps() as f64)
}

/// Column layout and row extraction for trajectory scenarios.
struct Layout {
    scenario: Scenario,
    mode: Mode,
}

impl Layout {
    fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            scenario: cfg.scenario,
            mode: cfg.mode,
        }
    }

    fn columns(&self) -> Vec<&'static str> {
        let estimate = [
            "tau", "x_true", "p_true", "x_est", "p_est", "sd_x_est", "sd_p_est", "dI",
        ];
        match self.scenario {
            Scenario::Fig2 => estimate.to_vec(),
            Scenario::Fig3 => vec!["tau", "x_true", "p_true", "sd_x", "sd_p", "energy", "dI"],
            Scenario::Fig5 => {
                let mut c = estimate.to_vec();
                c.extend(["f_x", "f_p"]);
                c
            }
            _ => {
                let mut c = vec!["tau", "x_true", "p_true", "vx_true", "vp_true", "cxp_true"];
                if self.mode.has_estimator() {
                    c.extend(["x_est", "p_est", "vx_est", "vp_est", "cxp_est"]);
                }
                if self.mode.has_record() {
                    c.push("dI");
                }
                c.extend(["f_x", "f_p"]);
                c
            }
        }
    }

    fn row(&self, s: &StepSample) -> Vec<f64> {
        let t = &s.true_state;
        let d_i = s.record.map_or(0.0, |r| SQRT2 * r.d_i);
        let est = s.est_state.unwrap_or_else(levcool_core::GaussianState::ground);
        let (fx, fp) = (SQRT2 * s.actuation.fx, SQRT2 * s.actuation.fp);
        let sd = |v: f64| (2.0 * v).sqrt();
        match self.scenario {
            Scenario::Fig2 | Scenario::Fig5 => {
                let mut r = vec![
                    s.time,
                    SQRT2 * t.mean_x,
                    SQRT2 * t.mean_p,
                    SQRT2 * est.mean_x,
                    SQRT2 * est.mean_p,
                    sd(est.var_x),
                    sd(est.var_p),
                    d_i,
                ];
                if self.scenario == Scenario::Fig5 {
                    r.extend([fx, fp]);
                }
                r
            }
            Scenario::Fig3 => vec![
                s.time,
                SQRT2 * t.mean_x,
                SQRT2 * t.mean_p,
                sd(t.var_x),
                sd(t.var_p),
                t.energy(),
                d_i,
            ],
            _ => {
                let mut r = vec![
                    s.time,
                    SQRT2 * t.mean_x,
                    SQRT2 * t.mean_p,
                    2.0 * t.var_x,
                    2.0 * t.var_p,
                    2.0 * t.cov_xp,
                ];
                if self.mode.has_estimator() {
                    r.extend([
                        SQRT2 * est.mean_x,
                        SQRT2 * est.mean_p,
                        2.0 * est.var_x,
                        2.0 * est.var_p,
                        2.0 * est.cov_xp,
                    ]);
                }
                if self.mode.has_record() {
                    r.push(d_i);
                }
                r.extend([fx, fp]);
                r
            }
        }
    }

    fn table(&self, sp: &SimParams, seed: u64) -> Result<Table> {
        let runner = TrajectoryRunner::new(*sp, seed, self.mode)?;
        let mut table = Table::new(&self.columns());
        table.rows.reserve(runner.n_steps());
        for sample in runner {
            table.push(self.row(&sample?));
        }
        Ok(table)
    }
}

fn content(cfg: &ScenarioConfig) -> String {
    format!("trajectory ({})", mode_name(cfg.mode))
}

fn run_single(cfg: &ScenarioConfig, dest: &Destination, outputs: &mut OutputSet) -> Result<()> {
    let sp = sim_params(cfg)?;
    let seed = cfg.seeds[0];
    log::info!("{}: seed {seed}, {} steps", cfg.scenario, sp.n_steps());
    let table = Layout::new(cfg).table(&sp, seed)?;
    let meta = trajectory_meta(cfg, &sp, &content(cfg), vec![seed]);
    let path = dest.path_for(stem(cfg), "", cfg.format);
    outputs.write_with(path.as_deref(), |w| write_table(w, cfg.format, &meta, &table))
}

/// Running mean and sum of squared deviations per table cell.
struct Welford {
    count: usize,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl Welford {
    fn new() -> Self {
        Self {
            count: 0,
            mean: Vec::new(),
            m2: Vec::new(),
        }
    }

    fn add(&mut self, table: &Table) {
        if self.count == 0 {
            self.mean = table.rows.clone();
            self.m2 = table.rows.iter().map(|r| vec![0.0; r.len()]).collect();
            self.count = 1;
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), row) in self.mean.iter_mut().zip(&mut self.m2).zip(&table.rows) {
            for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
                let delta = x - *m;
                *m += delta / n;
                *s += delta * (x - *m);
            }
        }
    }

    /// First column kept as the abscissa, the rest as `_mean` and `_stderr`.
    fn summary(&self, columns: &[String]) -> Table {
        let mut names = vec![columns[0].clone()];
        for c in &columns[1..] {
            names.push(format!("{c}_mean"));
            names.push(format!("{c}_stderr"));
        }
        let mut out = Table::new(&names);
        let n = self.count as f64;
        for (mean, m2) in self.mean.iter().zip(&self.m2) {
            let mut row = vec![mean[0]];
            for (m, s) in mean[1..].iter().zip(&m2[1..]) {
                row.push(*m);
                row.push((s / (n - 1.0) / n).sqrt());
            }
            out.push(row);
        }
        out
    }
}

fn run_ensemble(cfg: &ScenarioConfig, opts: RunOptions, dest: &Destination, outputs: &mut OutputSet) -> Result<()> {
    let sp = sim_params(cfg)?;
    let layout = Layout::new(cfg);
    let columns: Vec<String> = layout.columns().iter().map(|c| c.to_string()).collect();
    let mut acc = Welford::new();
    let chunk = 2 * rayon::current_num_threads();
    log::info!(
        "{}: {} seeds, {} steps each, {} threads",
        cfg.scenario,
        cfg.seeds.len(),
        sp.n_steps(),
        rayon::current_num_threads()
    );
    for seeds in cfg.seeds.chunks(chunk) {
        let tables = ensemble_map(seeds, |seed| layout.table(&sp, seed));
        for (&seed, table) in seeds.iter().zip(tables) {
            let table = table?;
            if opts.per_seed {
                let meta = trajectory_meta(cfg, &sp, &content(cfg), vec![seed]);
                let path = dest.path_for(stem(cfg), &format!("_seed{seed}"), cfg.format);
                outputs.write_with(path.as_deref(), |w| write_table(w, cfg.format, &meta, &table))?;
            }
            acc.add(&table);
        }
        log::debug!("{} of {} seeds done", acc.count, cfg.seeds.len());
    }
    let summary = acc.summary(&columns);
    let meta = trajectory_meta(
        cfg,
        &sp,
        &format!("{} ensemble summary", content(cfg)),
        cfg.seeds.clone(),
    );
    let path = match dest {
        Destination::File(p) => Some(p.clone()),
        _ => dest.path_for(stem(cfg), "_summary", cfg.format),
    };
    outputs.write_with(path.as_deref(), |w| write_table(w, cfg.format, &meta, &summary))
}

fn grid_meta(cfg: &ScenarioConfig, content: &str) -> Meta {
    Meta::new(cfg, content, Vec::new())
        .resolve("gamma_fb", cfg.trap.gamma_fb)
        .resolve("n_k", cfg.k_grid.len() as f64)
        .resolve("n_eta", cfg.eta_family.len() as f64)
}

fn run_fig4(cfg: &ScenarioConfig, dest: &Destination, outputs: &mut OutputSet) -> Result<()> {
    let mut table = Table::new(&["k_tilde", "eta", "v_x_tilde", "v_p_tilde"]);
    for &eta in &cfg.eta_family {
        for &k in &cfg.k_grid {
            let c = conditional_steady_state(eta, k)?;
            table.push(vec![k, eta, c.v_x_tilde, c.v_p_tilde]);
        }
    }
    let meta = grid_meta(cfg, "conditional steady-state variances");
    let path = dest.path_for(stem(cfg), "", cfg.format);
    outputs.write_with(path.as_deref(), |w| write_table(w, cfg.format, &meta, &table))
}

fn run_fig6(cfg: &ScenarioConfig, dest: &Destination, outputs: &mut OutputSet) -> Result<()> {
    let mut table = Table::new(&["eta", "k_tilde", "n_phonon", "purity"]);
    for r in cooling_landscape(&cfg.eta_family, &cfg.k_grid, cfg.trap.gamma_fb)? {
        table.push(vec![r.eta, r.k_tilde, r.phonon, r.purity_conditional]);
    }
    let meta = grid_meta(cfg, "steady-state phonon number and purity");
    let path = dest.path_for(stem(cfg), "", cfg.format);
    outputs.write_with(path.as_deref(), |w| write_table(w, cfg.format, &meta, &table))
}

fn run_oracle(cfg: &ScenarioConfig, dest: &Destination, outputs: &mut OutputSet) -> Result<()> {
    debug_assert_eq!(cfg.format, Format::Json);
    let sp = sim_params(cfg)?;
    let seed = cfg.seeds[0];
    log::info!("oracle-check: dim {}, {} steps", cfg.dim, sp.n_steps());
    let report = compare_oracle(&sp, cfg.duration, cfg.dim, seed)?;
    let meta = trajectory_meta(cfg, &sp, "Fock-basis oracle comparison (simulation units)", vec![seed])
        .resolve("max_deviation", report.max_deviation());
    let path = dest.path_for(stem(cfg), "", cfg.format);
    outputs.write_with(path.as_deref(), |w| write_json(w, &meta, &report))
}
