//! `solve-pde`: physics-informed ELM on the three pricing presets.

use std::path::PathBuf;

use elmfin::oracles::mc_rainbow_put_max;
use elmfin::pinn::presets::{BsPut, DoubleBarrierCall, RainbowMaxPut};
use elmfin::pinn::{relative_error, solve_pde, CollocationCounts, ElmSolution, PinnConfig, Weighting};
use serde_json::json;

use crate::config::{key, Config, Key};
use crate::error::{CliError, CliResult};
use crate::run::{num, RunDir, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    BsPut,
    Rainbow,
    Barrier,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::BsPut => "bs_put",
            Preset::Rainbow => "rainbow",
            Preset::Barrier => "barrier",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "bs_put" => Ok(Preset::BsPut),
            "rainbow" => Ok(Preset::Rainbow),
            "barrier" => Ok(Preset::Barrier),
            _ => Err(CliError::config(format!("unknown preset {s:?}; expected bs_put, rainbow or barrier"))),
        }
    }
}

fn solver_keys(preset: Preset) -> Vec<Key> {
    let d = PinnConfig::default();
    vec![
        key("out_dir", format!("runs/solve-pde-{}", preset.name()), "run directory"),
        key("nodes", d.nodes, "hidden nodes L"),
        key("scale", d.scale, "hidden weight scale"),
        key("activation", d.activation, "sine, tanh or sigmoid"),
        key("ridge", d.ridge, "ridge penalty C"),
        key("interior", d.counts.interior, "interior collocation points"),
        key("boundary", d.counts.boundary, "boundary collocation points"),
        key("terminal", d.counts.terminal, "terminal collocation points"),
        key("near_expiry", d.counts.near_expiry, "share of interior points drawn close to expiry"),
        key("layer_seed", d.layer_seed, "hidden layer seed"),
        key("collocation_seed", d.collocation_seed, "collocation sampling seed"),
        key("weighting", "inverse-sqrt-count", "uniform or inverse-sqrt-count"),
        key("normalize", d.normalize, "map inputs to [-1, 1] before the hidden layer"),
    ]
}

pub fn schema(preset: Preset) -> Vec<Key> {
    let mut k = solver_keys(preset);
    match preset {
        Preset::BsPut => {
            let p = BsPut::default();
            k.extend([
                key("strike", p.strike, "strike K"),
                key("rate", p.rate, "risk-free rate r"),
                key("sigma", p.sigma, "volatility"),
                key("horizon", p.horizon, "maturity T"),
                key("lo_mult", p.lo_mult, "domain lower edge as a multiple of K"),
                key("hi_mult", p.hi_mult, "domain upper edge as a multiple of K"),
                key("n_eval", 200, "spots on the evaluation line"),
            ]);
        }
        Preset::Rainbow => {
            let p = RainbowMaxPut::default();
            k.extend([
                key("strike", p.strike, "strike K"),
                key("rate", p.rate, "risk-free rate r"),
                key("sigma1", p.sigma1, "volatility of the first asset"),
                key("sigma2", p.sigma2, "volatility of the second asset"),
                key("rho", p.rho, "correlation"),
                key("horizon", p.horizon, "maturity T"),
                key("lo_mult", p.lo_mult, "domain lower edge as a multiple of K"),
                key("hi_mult", p.hi_mult, "domain upper edge as a multiple of K"),
                key("eval_lo", 10.0, "lowest spot on the evaluation grid"),
                key("eval_hi", 30.0, "highest spot on the evaluation grid"),
                key("n_eval", 11, "spots per axis on the evaluation grid"),
                key("truth", "quadrature", "reference prices: quadrature or mc"),
                key("mc_paths", 1_000_000, "paths per grid point when truth = mc"),
                key("mc_seed", 1, "Monte Carlo seed"),
            ]);
        }
        Preset::Barrier => {
            let p = DoubleBarrierCall::default();
            k.extend([
                key("lower", p.lower, "lower barrier E"),
                key("upper", p.upper, "upper barrier F"),
                key("strike", p.strike, "strike K"),
                key("rate", p.rate, "risk-free rate r"),
                key("sigma", p.sigma, "volatility"),
                key("horizon", p.horizon, "maturity T"),
                key("n_eval", 199, "spots on the evaluation line"),
            ]);
        }
    }
    k
}

fn pinn_config(cfg: &Config) -> CliResult<PinnConfig> {
    let weighting = match cfg.raw("weighting") {
        "uniform" => Weighting::Uniform,
        "inverse-sqrt-count" => Weighting::InverseSqrtCount,
        w => return Err(CliError::config(format!("weighting must be uniform or inverse-sqrt-count, got {w:?}"))),
    };
    Ok(PinnConfig {
        nodes: cfg.get("nodes")?,
        scale: cfg.get("scale")?,
        activation: cfg.get("activation")?,
        ridge: cfg.get("ridge")?,
        counts: CollocationCounts {
            interior: cfg.get("interior")?,
            boundary: cfg.get("boundary")?,
            terminal: cfg.get("terminal")?,
            near_expiry: cfg.get("near_expiry")?,
        },
        layer_seed: cfg.get("layer_seed")?,
        collocation_seed: cfg.get("collocation_seed")?,
        weighting,
        normalize: cfg.get("normalize")?,
    })
}

fn record_solution(run: &mut RunDir, sol: &ElmSolution) {
    let r = &sol.residuals;
    run.record("residuals", json!({"interior": r.interior, "boundary": r.boundary, "terminal": r.terminal}));
}

fn slice(a: &ndarray::Array1<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

pub fn run(preset: Preset, cfg: &Config) -> CliResult<PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let pinn = pinn_config(cfg)?;
    let re = match preset {
        Preset::BsPut => {
            let p = BsPut {
                strike: cfg.get("strike")?,
                rate: cfg.get("rate")?,
                sigma: cfg.get("sigma")?,
                horizon: cfg.get("horizon")?,
                lo_mult: cfg.get("lo_mult")?,
                hi_mult: cfg.get("hi_mult")?,
            };
            let problem = p.problem()?;
            let sol = run.timed("solve", || solve_pde(&problem, &pinn))?;
            record_solution(&mut run, &sol);
            let n: usize = cfg.get("n_eval")?;
            let (spots, pts) = p.eval_line(n);
            let pred = sol.predict(pts.view())?;
            let truth = p.truth_on(&spots, p.horizon);
            let re = relative_error(slice(&pred), slice(&truth))?;

            let mut line = Table::new(&["S", "tau", "value", "truth"]);
            for i in 0..n {
                line.push(vec![num(spots[i]), num(p.horizon), num(pred[i]), num(truth[i])]);
            }
            run.table("solution.csv", &line)?;

            let mut grid = Table::new(&["S", "tau", "value", "truth"]);
            let mut errs = Table::new(&["tau", "relative_error"]);
            let mut total = 0.0;
            let lines = p.eval_grid(50);
            for (tau, s, pts) in &lines {
                let v = sol.predict(pts.view())?;
                let t = p.truth_on(s, *tau);
                let e = relative_error(slice(&v), slice(&t))?;
                total += e;
                errs.push(vec![num(*tau), num(e)]);
                for i in 0..s.len() {
                    grid.push(vec![num(s[i]), num(*tau), num(v[i]), num(t[i])]);
                }
            }
            let mean = total / lines.len() as f64;
            run.table("grid.csv", &grid)?;
            run.table("errors.csv", &errs)?;
            run.record("grid_mean_relative_error", json!(mean));
            run.log(format!("grid mean relative error {mean:.5}"));
            re
        }
        Preset::Rainbow => {
            let p = RainbowMaxPut {
                strike: cfg.get("strike")?,
                rate: cfg.get("rate")?,
                sigma1: cfg.get("sigma1")?,
                sigma2: cfg.get("sigma2")?,
                rho: cfg.get("rho")?,
                horizon: cfg.get("horizon")?,
                lo_mult: cfg.get("lo_mult")?,
                hi_mult: cfg.get("hi_mult")?,
            };
            let problem = p.problem()?;
            let sol = run.timed("solve", || solve_pde(&problem, &pinn))?;
            record_solution(&mut run, &sol);
            let (spots, pts) = p.eval_grid(cfg.get("eval_lo")?, cfg.get("eval_hi")?, cfg.get("n_eval")?);
            let pred = sol.predict(pts.view())?;
            let mc_paths: usize = cfg.get("mc_paths")?;
            let mc_seed: u64 = cfg.get("mc_seed")?;
            let mut se = Vec::new();
            let truth: Vec<f64> = match cfg.raw("truth") {
                "quadrature" => spots.iter().map(|&(a, b)| p.truth(a, b, p.horizon)).collect::<Result<_, _>>()?,
                "mc" => {
                    let mut out = Vec::with_capacity(spots.len());
                    for (i, &(a, b)) in spots.iter().enumerate() {
                        let est = mc_rainbow_put_max(&p.spec(a, b, p.horizon), mc_paths, mc_seed.wrapping_add(i as u64))?;
                        se.push(est.std_error);
                        out.push(est.price);
                    }
                    out
                }
                t => return Err(CliError::config(format!("truth must be quadrature or mc, got {t:?}"))),
            };
            let mut table = Table::new(&["S1", "S2", "value", "truth"]);
            for (i, &(a, b)) in spots.iter().enumerate() {
                table.push(vec![num(a), num(b), num(pred[i]), num(truth[i])]);
            }
            run.table("solution.csv", &table)?;
            if !se.is_empty() {
                run.record("max_truth_std_error", json!(se.iter().cloned().fold(0.0, f64::max)));
            }
            relative_error(slice(&pred), &truth)?
        }
        Preset::Barrier => {
            let p = DoubleBarrierCall {
                lower: cfg.get("lower")?,
                upper: cfg.get("upper")?,
                strike: cfg.get("strike")?,
                rate: cfg.get("rate")?,
                sigma: cfg.get("sigma")?,
                horizon: cfg.get("horizon")?,
            };
            let problem = p.problem()?;
            let sol = run.timed("solve", || solve_pde(&problem, &pinn))?;
            record_solution(&mut run, &sol);
            let (spots, pts) = p.eval_line(cfg.get("n_eval")?);
            let pred = sol.predict(pts.view())?;
            let truth: Vec<f64> = spots.iter().map(|&s| p.truth(s, p.horizon)).collect::<Result<_, _>>()?;
            let mut table = Table::new(&["S", "tau", "value", "truth"]);
            for (i, &s) in spots.iter().enumerate() {
                table.push(vec![num(s), num(p.horizon), num(pred[i]), num(truth[i])]);
            }
            run.table("solution.csv", &table)?;
            relative_error(slice(&pred), &truth)?
        }
    };
    run.record("preset", json!(preset.name()));
    run.record("relative_error", json!(re));
    run.log(format!("relative error: {re:.5}"));
    run.finish()
}
