//! Experiment driver behind the `elmfin` binary.
//!
//! Each subcommand reads a flat `key = value` config (file plus overrides),
//! runs one experiment and writes its own directory:
//!
//! | file            | contents                                        |
//! |-----------------|-------------------------------------------------|
//! | `config.txt`    | fully resolved config, reloadable with `-c`     |
//! | `summary.json`  | headline numbers and the version string         |
//! | `*.csv`         | results; byte-identical for identical configs   |
//! | `*timing.csv`   | wall-clock of the algorithmic phases only       |
//! | `run.log`       | progress messages                               |

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

use std::path::{Path, PathBuf};

use commands::pde::Preset;
pub use config::{Config, Key};
pub use error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenHeston,
    TrainElm,
    TrainEir,
    TrainGpr,
    SolvePde(Preset),
    IvsFit,
    IvsAudit,
    ClassifyRun,
    Bench,
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::GenHeston => "gen-heston".into(),
            Command::TrainElm => "train-elm".into(),
            Command::TrainEir => "train-eir".into(),
            Command::TrainGpr => "train-gpr".into(),
            Command::SolvePde(p) => format!("solve-pde {}", p.name()),
            Command::IvsFit => "ivs-fit".into(),
            Command::IvsAudit => "ivs-audit".into(),
            Command::ClassifyRun => "classify-run".into(),
            Command::Bench => "bench".into(),
        }
    }

    pub fn schema(self) -> Vec<Key> {
        use commands::*;
        match self {
            Command::GenHeston => heston::gen_heston_schema(),
            Command::TrainElm => heston::train_elm_schema(),
            Command::TrainEir => heston::train_eir_schema(),
            Command::TrainGpr => heston::train_gpr_schema(),
            Command::SolvePde(p) => pde::schema(p),
            Command::IvsFit => ivs::fit_schema(),
            Command::IvsAudit => ivs::audit_schema(),
            Command::ClassifyRun => classify::schema(),
            Command::Bench => heston::bench_schema(),
        }
    }

    pub fn resolve(self, file: Option<&Path>, overrides: &[String]) -> CliResult<Config> {
        Config::resolve(&self.name(), &self.schema(), file, overrides)
    }

    /// Runs with a resolved config; returns the run directory.
    pub fn execute(self, cfg: &Config) -> CliResult<PathBuf> {
        use commands::*;
        match self {
            Command::GenHeston => heston::gen_heston(cfg),
            Command::TrainElm => heston::train_elm(cfg),
            Command::TrainEir => heston::train_eir(cfg),
            Command::TrainGpr => heston::train_gpr(cfg),
            Command::SolvePde(p) => pde::run(p, cfg),
            Command::IvsFit => ivs::fit(cfg),
            Command::IvsAudit => ivs::audit(cfg),
            Command::ClassifyRun => classify::run(cfg),
            Command::Bench => heston::bench(cfg),
        }
    }
}

/// Resolve and execute in one step.
pub fn run(cmd: Command, file: Option<&Path>, overrides: &[String]) -> CliResult<PathBuf> {
    let cfg = cmd.resolve(file, overrides)?;
    cmd.execute(&cfg)
}
