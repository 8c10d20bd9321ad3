use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elmfin_cli::commands::pde::Preset;
use elmfin_cli::{config, run, Command};

#[derive(Parser)]
#[command(name = "elmfin", version = env!("CARGO_PKG_VERSION"), about = "Extreme learning machine experiments for option pricing")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Print the accepted keys with their defaults and exit.
    #[arg(long)]
    list_keys: bool,
    /// `key=value` overrides, applied after the config file.
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    #[value(name = "bs_put")]
    BsPut,
    Rainbow,
    Barrier,
}

#[derive(Subcommand)]
enum Sub {
    /// Heston implied-volatility dataset via COS pricing.
    GenHeston(Common),
    /// Batch ELM on the Heston dataset.
    TrainElm(Common),
    /// Incremental EIR-ELM on the Heston dataset.
    TrainEir(Common),
    /// Gaussian process baseline on the Heston dataset.
    TrainGpr(Common),
    /// Physics-informed ELM for a pricing PDE.
    SolvePde {
        preset: PresetArg,
        #[command(flatten)]
        common: Common,
    },
    /// Clean quotes and fit an implied-volatility surface.
    IvsFit(Common),
    /// Static no-arbitrage audit of a surface.
    IvsAudit(Common),
    /// Rolling ELM vs logistic regression on a synthetic market.
    ClassifyRun(Common),
    /// Comparison table and node/scale sweeps.
    Bench(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Sub::GenHeston(c) => (Command::GenHeston, c),
        Sub::TrainElm(c) => (Command::TrainElm, c),
        Sub::TrainEir(c) => (Command::TrainEir, c),
        Sub::TrainGpr(c) => (Command::TrainGpr, c),
        Sub::SolvePde { preset, common } => {
            let p = match preset {
                PresetArg::BsPut => Preset::BsPut,
                PresetArg::Rainbow => Preset::Rainbow,
                PresetArg::Barrier => Preset::Barrier,
            };
            (Command::SolvePde(p), common)
        }
        Sub::IvsFit(c) => (Command::IvsFit, c),
        Sub::IvsAudit(c) => (Command::IvsAudit, c),
        Sub::ClassifyRun(c) => (Command::ClassifyRun, c),
        Sub::Bench(c) => (Command::Bench, c),
    };
    if common.list_keys {
        print!("{}", config::describe(&cmd.schema()));
        return ExitCode::SUCCESS;
    }
    match run(cmd, common.config.as_deref(), &common.overrides) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
