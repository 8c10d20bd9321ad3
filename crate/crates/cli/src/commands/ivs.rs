//! `ivs-fit` and `ivs-audit`: surface fitting on cleaned quotes and the
//! static no-arbitrage audit.

use std::path::PathBuf;

use elmfin::ivs::{
    arbitrage_report, clean_quotes, fit_surface, read_quotes_csv, synthetic_chain, write_quotes_csv, AuditGrid,
    ChainConfig, IvQuote, IvSurface, RejectReason, SurfaceConfig, SurfaceFit, SyntheticSurface,
};
use ndarray::Array2;
use serde_json::json;

use crate::config::{key, Config, Key};
use crate::error::{CliError, CliResult};
use crate::run::{num, RunDir, Table};

const REASONS: [RejectReason; 6] = [
    RejectReason::InvalidInput,
    RejectReason::MissingIv,
    RejectReason::Maturity,
    RejectReason::Moneyness,
    RejectReason::InTheMoney,
    RejectReason::StaticBounds,
];

fn fit_keys(out: &str) -> Vec<Key> {
    let c = ChainConfig::default();
    let s = SurfaceConfig::default();
    vec![
        key("out_dir", out, "run directory"),
        key("quotes", "", "quote CSV (date,K,S,r,T,iv,kind); empty draws a synthetic chain"),
        key("chain_n", c.n, "synthetic quotes"),
        key("chain_seed", 1, "synthetic chain seed"),
        key("chain_rate", c.rate, "rate attached to synthetic quotes"),
        key("chain_noise", c.noise, "Gaussian noise on synthetic IVs"),
        key("chain_surface", "smile", "synthetic surface: smile or flat"),
        key("flat_sigma", 0.2, "volatility of the flat synthetic surface"),
        key("nodes", s.nodes, "hidden nodes"),
        key("scale", s.scale, "hidden weight scale"),
        key("activation", s.activation, "sine, tanh or sigmoid"),
        key("ridge", s.ridge, "ridge penalty C"),
        key("train_frac", s.train_frac, "training share"),
        key("seed", s.seed, "hidden layer and split seed"),
    ]
}

fn synthetic_surface(cfg: &Config) -> CliResult<SyntheticSurface> {
    match cfg.raw("chain_surface") {
        "smile" => Ok(SyntheticSurface::smile()),
        "flat" => Ok(SyntheticSurface::flat(cfg.get("flat_sigma")?)),
        s => Err(CliError::config(format!("chain_surface must be smile or flat, got {s:?}"))),
    }
}

fn load_quotes(cfg: &Config) -> CliResult<Vec<IvQuote>> {
    let path = cfg.raw("quotes");
    if !path.is_empty() {
        return Ok(read_quotes_csv(path)?);
    }
    let chain = ChainConfig {
        n: cfg.get("chain_n")?,
        rate: cfg.get("chain_rate")?,
        noise: cfg.get("chain_noise")?,
        surface: synthetic_surface(cfg)?,
        ..ChainConfig::default()
    };
    Ok(synthetic_chain(&chain, cfg.get("chain_seed")?)?)
}

fn clean_and_fit(cfg: &Config, run: &mut RunDir) -> CliResult<SurfaceFit> {
    let raw = load_quotes(cfg)?;
    let cleaned = clean_quotes(&raw);
    write_quotes_csv(run.file("quotes_clean.csv"), &cleaned.kept)?;
    let mut rej = Table::new(&["reason", "count"]);
    for r in REASONS {
        rej.push(vec![r.to_string(), cleaned.count(r).to_string()]);
    }
    run.table("rejections.csv", &rej)?;
    run.record("quotes", json!({"raw": raw.len(), "kept": cleaned.kept.len(), "rejected": cleaned.rejected.len()}));
    let sc = SurfaceConfig {
        nodes: cfg.get("nodes")?,
        scale: cfg.get("scale")?,
        activation: cfg.get("activation")?,
        ridge: cfg.get("ridge")?,
        train_frac: cfg.get("train_frac")?,
        seed: cfg.get("seed")?,
    };
    let fit = run.timed("fit", || fit_surface(&cleaned.kept, &sc))?;
    run.record("fit", json!({"rmse": fit.rmse, "mae": fit.mae, "n_train": fit.n_train, "n_test": fit.n_test}));
    run.log(format!("{} quotes kept; test rmse {:.5}", cleaned.kept.len(), fit.rmse));
    let mut m = Table::new(&["n_train", "n_test", "rmse", "mae"]);
    m.push(vec![fit.n_train.to_string(), fit.n_test.to_string(), num(fit.rmse), num(fit.mae)]);
    run.table("metrics.csv", &m)?;
    Ok(fit)
}

/// Fitted IV on a `(T, k)` grid.
fn surface_table(s: &dyn IvSurface, ts: &[f64], ks: &[f64]) -> CliResult<Table> {
    let pts = Array2::from_shape_fn((ts.len() * ks.len(), 2), |(i, j)| if j == 0 { ts[i / ks.len()] } else { ks[i % ks.len()] });
    let iv = s.iv_batch(pts.view())?;
    let mut t = Table::new(&["T", "k", "iv"]);
    for (i, v) in iv.iter().enumerate() {
        t.push(vec![num(pts[[i, 0]]), num(pts[[i, 1]]), num(*v)]);
    }
    Ok(t)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect()
}

pub fn fit_schema() -> Vec<Key> {
    let mut k = fit_keys("runs/ivs-fit");
    k.push(key("save_model", false, "write model.json"));
    k
}

pub fn fit(cfg: &Config) -> CliResult<PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let fit = clean_and_fit(cfg, &mut run)?;
    let ts = linspace(0.05, 3.0, 60);
    let ks = linspace(-1.2, 0.3, 76);
    run.table("surface.csv", &surface_table(&fit, &ts, &ks)?)?;
    if cfg.get::<bool>("save_model")? {
        fit.model.save(run.file("model.json"))?;
    }
    run.finish()
}

pub fn audit_schema() -> Vec<Key> {
    let g = AuditGrid::default();
    let mut k = fit_keys("runs/ivs-audit");
    k.extend([
        key("surface", "fit", "surface to audit: fit, smile or flat"),
        key("k_lo", g.k_lo, "lowest strike (spot units)"),
        key("k_hi", g.k_hi, "highest strike (spot units)"),
        key("n_k", g.n_k, "strikes"),
        key("t_lo", g.t_lo, "shortest maturity"),
        key("t_hi", g.t_hi, "longest maturity"),
        key("n_t", g.n_t, "maturities"),
        key("rate", g.rate, "rate used to turn IV into call prices"),
    ]);
    k
}

pub fn audit(cfg: &Config) -> CliResult<PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let grid = AuditGrid {
        k_lo: cfg.get("k_lo")?,
        k_hi: cfg.get("k_hi")?,
        n_k: cfg.get("n_k")?,
        t_lo: cfg.get("t_lo")?,
        t_hi: cfg.get("t_hi")?,
        n_t: cfg.get("n_t")?,
        rate: cfg.get("rate")?,
        ..AuditGrid::default()
    };
    let rep = match cfg.raw("surface") {
        "fit" => {
            let fit = clean_and_fit(cfg, &mut run)?;
            run.timed("audit", || arbitrage_report(&fit, &grid))?
        }
        "smile" => arbitrage_report(&SyntheticSurface::smile(), &grid)?,
        "flat" => arbitrage_report(&SyntheticSurface::flat(cfg.get("flat_sigma")?), &grid)?,
        s => return Err(CliError::config(format!("surface must be fit, smile or flat, got {s:?}"))),
    };
    let mut v = Table::new(&["condition", "violation_rate", "violated_slices", "slices"]);
    let rates = [rep.violation_rate_t, rep.violation_rate_k, rep.violation_rate_convexity];
    let slices = [grid.n_k, grid.n_t, grid.n_t];
    for (i, name) in ["dC_dT", "dC_dK", "d2C_dK2"].iter().enumerate() {
        v.push(vec![name.to_string(), num(rates[i]), rep.violated_slices[i].to_string(), slices[i].to_string()]);
    }
    run.table("violations.csv", &v)?;
    rep.write_differences_csv(run.file("differences.csv"))?;
    run.log(format!(
        "violation rates: dC/dT {:.2}%, dC/dK {:.2}%, convexity {:.2}%",
        rates[0], rates[1], rates[2]
    ));
    run.record("violation_rate_t", json!(rep.violation_rate_t));
    run.record("violation_rate_k", json!(rep.violation_rate_k));
    run.record("violation_rate_convexity", json!(rep.violation_rate_convexity));
    run.record("tolerance", json!(rep.tolerance));
    run.finish()
}
