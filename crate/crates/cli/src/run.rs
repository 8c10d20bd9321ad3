//! One output directory per run: config echo, CSVs, JSON summary, log.
//!
//! Wall-clock timings go to `timing.csv` (or another `*_timing.csv`) only, so
//! every other CSV is a pure function of the echoed config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::error::CliResult;

pub fn version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("ELMFIN_GIT_DESCRIBE"))
}

/// In-memory CSV with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::CliError::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest representation that round-trips; exponent form for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub struct RunDir {
    pub path: PathBuf,
    log: Vec<String>,
    timing: Table,
    summary: Map<String, Value>,
}

impl RunDir {
    pub fn create(path: impl AsRef<Path>, cfg: &Config) -> CliResult<Self> {
        let path = path.as_ref().to_path_buf();
        fs::create_dir_all(&path)?;
        fs::write(path.join("config.txt"), cfg.echo(&version()))?;
        let mut summary = Map::new();
        summary.insert("command".into(), json!(cfg.command));
        summary.insert("version".into(), json!(version()));
        Ok(Self {
            path,
            log: Vec::new(),
            timing: Table::new(&["phase", "wall_ms"]),
            summary,
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        fs::write(self.file(name), contents)?;
        Ok(())
    }

    pub fn table(&self, name: &str, t: &Table) -> CliResult<()> {
        self.write(name, &t.render()?)
    }

    pub fn log(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{msg}");
        self.log.push(msg);
    }

    /// Runs `f`, recording its wall-clock time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        self.timing.push(vec![phase.to_string(), format!("{ms:.3}")]);
        self.log(format!("{phase}: {ms:.1} ms"));
        out
    }

    pub fn record(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn summary(&self) -> &Map<String, Value> {
        &self.summary
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        self.write("summary.json", &serde_json::to_string_pretty(&Value::Object(self.summary.clone()))?)?;
        if !self.timing.is_empty() {
            self.table("timing.csv", &self.timing)?;
        }
        let mut log = self.log.join("\n");
        log.push('\n');
        self.write("run.log", &log)?;
        Ok(self.path)
    }
}
