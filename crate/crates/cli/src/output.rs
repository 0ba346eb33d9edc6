//! Tables, headers and all-or-nothing file output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{Format, ScenarioConfig, HEADER_CONFIG_PREFIX};
use crate::error::{CliError, Result};

pub const UNITS_NOTE: &str =
    "tau = omega t; positions, momenta, dI and f_x/f_p in ground-state units x0, p0; variances in x0^2, p0^2";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub content: String,
    pub units: &'static str,
    pub seeds: Vec<u64>,
    pub config: BTreeMap<String, String>,
    pub resolved: BTreeMap<String, f64>,
}

impl Meta {
    pub fn new(cfg: &ScenarioConfig, content: impl Into<String>, seeds: Vec<u64>) -> Self {
        Self {
            tool: "levcool",
            version: env!("CARGO_PKG_VERSION"),
            scenario: cfg.scenario.to_string(),
            content: content.into(),
            units: UNITS_NOTE,
            seeds,
            config: cfg
                .settings()
                .entries()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            resolved: BTreeMap::new(),
        }
    }

    pub fn resolve(mut self, key: &str, value: f64) -> Self {
        self.resolved.insert(key.to_string(), value);
        self
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(w: &mut dyn Write, meta: &Meta, table: &Table) -> io::Result<()> {
    writeln!(w, "# {} {}", meta.tool, meta.version)?;
    writeln!(w, "# scenario: {}", meta.scenario)?;
    writeln!(w, "# content: {}", meta.content)?;
    writeln!(w, "# units: {}", meta.units)?;
    if !meta.seeds.is_empty() {
        let seeds: Vec<String> = meta.seeds.iter().map(u64::to_string).collect();
        writeln!(w, "# seeds: {}", seeds.join(","))?;
    }
    // Config lines in canonical key order so the header reloads as a config.
    let cfg_order = crate::config::KEYS
        .iter()
        .filter_map(|k| meta.config.get(*k).map(|v| (k, v)));
    for (k, v) in cfg_order {
        writeln!(w, "{HEADER_CONFIG_PREFIX} {k} = {v}")?;
    }
    for (k, v) in &meta.resolved {
        writeln!(w, "# resolved: {k} = {}", float(*v))?;
    }
    writeln!(w, "{}", table.columns.join(","))?;
    let mut line = String::new();
    for row in &table.rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&float(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Document<'a, D: Serialize> {
    meta: &'a Meta,
    data: &'a D,
}

pub fn write_json<D: Serialize>(w: &mut dyn Write, meta: &Meta, data: &D) -> Result<()> {
    serde_json::to_writer(&mut *w, &Document { meta, data })?;
    writeln!(w).map_err(|e| CliError::io("<json>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct TableData<'a> {
    columns: &'a [String],
    rows: &'a [Vec<f64>],
}

pub fn write_table(w: &mut dyn Write, format: Format, meta: &Meta, table: &Table) -> Result<()> {
    match format {
        Format::Csv => write_csv(w, meta, table).map_err(|e| CliError::io("<csv>", e)),
        Format::Json => write_json(
            w,
            meta,
            &TableData {
                columns: &table.columns,
                rows: &table.rows,
            },
        ),
    }
}

/// Where output files go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    /// Exactly this file; secondary outputs take its stem plus a suffix.
    File(PathBuf),
    Dir(PathBuf),
}

impl Destination {
    /// `-` is stdout, a path ending in `.<ext>` is a file, anything else a
    /// directory.
    pub fn from_out(out: &Path, format: Format) -> Self {
        if out.as_os_str() == "-" {
            Destination::Stdout
        } else if out.extension().is_some_and(|e| e == format.extension()) {
            Destination::File(out.to_path_buf())
        } else {
            Destination::Dir(out.to_path_buf())
        }
    }

    /// Path for the output named `<stem><suffix>.<ext>`; `None` means stdout.
    pub fn path_for(&self, stem: &str, suffix: &str, format: Format) -> Option<PathBuf> {
        match self {
            Destination::Stdout => None,
            Destination::Dir(dir) => Some(dir.join(format!("{stem}{suffix}.{}", format.extension()))),
            Destination::File(path) if suffix.is_empty() => Some(path.clone()),
            Destination::File(path) => {
                let base = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Some(path.with_file_name(format!("{base}{suffix}.{}", format.extension())))
            }
        }
    }
}

/// Files written so far; removed on drop unless committed.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    /// Writes through a temporary file in the target directory, then renames
    /// it into place. `None` writes to stdout.
    pub fn write_with<F>(&mut self, target: Option<&Path>, f: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let Some(path) = target else {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            return lock.flush().map_err(|e| CliError::io("<stdout>", e));
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut buf = BufWriter::new(tmp);
        f(&mut buf)?;
        let tmp = buf.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
        tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn destination_naming() {
        let d = Destination::from_out(Path::new("runs"), Format::Csv);
        assert_eq!(
            d.path_for("fig2", "_seed3", Format::Csv),
            Some(PathBuf::from("runs/fig2_seed3.csv"))
        );
        let f = Destination::from_out(Path::new("a/b.json"), Format::Json);
        assert_eq!(f.path_for("fig2", "", Format::Json), Some(PathBuf::from("a/b.json")));
        assert_eq!(
            f.path_for("fig2", "_seed1", Format::Json),
            Some(PathBuf::from("a/b_seed1.json"))
        );
        assert_eq!(Destination::from_out(Path::new("-"), Format::Csv), Destination::Stdout);
        assert!(matches!(
            Destination::from_out(Path::new("x.json"), Format::Csv),
            Destination::Dir(_)
        ));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        {
            let mut set = OutputSet::default();
            set.write_with(Some(&a), |w| writeln!(w, "x").map_err(|e| CliError::io("test", e)))
                .unwrap();
            assert!(a.exists());
            let err = set.write_with(Some(&dir.path().join("missing/b.csv")), |_| Ok(()));
            assert!(err.is_err());
        }
        assert!(!a.exists());
        let mut set = OutputSet::default();
        set.write_with(Some(&a), |w| writeln!(w, "x").map_err(|e| CliError::io("test", e)))
            .unwrap();
        assert_eq!(set.commit(), vec![a.clone()]);
        assert!(a.exists());
    }
}
