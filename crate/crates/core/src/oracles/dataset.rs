//! Heston implied-volatility training sets.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use super::bs::{bs_vega, BsParams, OptionKind};
use super::heston::{heston_cos_price, CosSettings, HestonParams};
use super::implied::implied_vol;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub const GENERATOR_VERSION: &str = "heston-cos-iv/1";
pub const FEATURES: [&str; 7] = ["k", "T", "rho", "kappa", "sigma", "theta", "v0"];

/// Sampling box: each input is drawn uniformly on its open interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonRanges {
    pub moneyness: (f64, f64),
    pub maturity: (f64, f64),
    pub rho: (f64, f64),
    pub kappa: (f64, f64),
    pub sigma: (f64, f64),
    pub theta: (f64, f64),
    pub v0: (f64, f64),
}

impl Default for HestonRanges {
    fn default() -> Self {
        Self {
            moneyness: (0.714, 1.667),
            maturity: (0.10, 3.00),
            rho: (-1.0, 0.0),
            kappa: (0.0, 4.0),
            sigma: (0.0, 0.5),
            theta: (0.0, 0.1),
            v0: (0.0, 0.5),
        }
    }
}

impl HestonRanges {
    /// Lower and upper bounds in feature order.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let all = [self.moneyness, self.maturity, self.rho, self.kappa, self.sigma, self.theta, self.v0];
        (all.iter().map(|r| r.0).collect(), all.iter().map(|r| r.1).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonDatasetConfig {
    pub ranges: HestonRanges,
    pub cos_terms: usize,
    pub cos_width: f64,
    /// Rows whose out-of-the-money price has Black-Scholes vega below this
    /// are treated as failed inversions: the volatility is not identified.
    pub min_vega: f64,
    /// Resample attempts allowed per requested row, on average.
    pub max_attempts_per_row: usize,
}

impl Default for HestonDatasetConfig {
    fn default() -> Self {
        Self {
            ranges: HestonRanges::default(),
            cos_terms: CosSettings::default().n_terms,
            cos_width: CosSettings::default().width,
            min_vega: 1e-4,
            max_attempts_per_row: 20,
        }
    }
}

/// Sidecar written next to the dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HestonDatasetMeta {
    pub generator: String,
    pub rng: String,
    pub seed: u64,
    pub rows: usize,
    pub failures: usize,
    pub config: HestonDatasetConfig,
}

impl HestonDatasetMeta {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// One priced row: inputs in feature order plus the implied volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonSample {
    pub moneyness: f64,
    pub maturity: f64,
    pub params: HestonParams,
    pub iv: f64,
}

/// Prices an out-of-the-money option with unit forward (`S = 1`, `r = 0`,
/// `K = k`) and inverts it to a Black-Scholes volatility.
pub fn heston_iv(params: &HestonParams, moneyness: f64, maturity: f64, cos: &CosSettings, min_vega: f64) -> Result<f64> {
    let kind = if moneyness >= 1.0 { OptionKind::Call } else { OptionKind::Put };
    let price = heston_cos_price(params, 1.0, moneyness, maturity, kind, cos)?;
    let iv = implied_vol(price, 1.0, moneyness, 0.0, maturity, kind)?;
    let vega = bs_vega(&BsParams {
        spot: 1.0,
        strike: moneyness,
        rate: 0.0,
        sigma: iv,
        tau: maturity,
    });
    if vega < min_vega {
        return Err(Error::NoSolution(format!("vega {vega:e} below floor; volatility not identified")));
    }
    Ok(iv)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.sample(Open01);
    lo + (hi - lo) * u
}

/// Draws `n` rows. Rows whose inversion fails are redrawn and counted.
pub fn generate_heston_dataset(n: usize, seed: u64, cfg: &HestonDatasetConfig) -> Result<(Dataset, HestonDatasetMeta)> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be >= 1"));
    }
    let cos = CosSettings {
        n_terms: cfg.cos_terms,
        width: cfg.cos_width,
    };
    let r = &cfg.ranges;
    let mut rng = rng::stream(seed, "heston-dataset");
    let budget = n.saturating_mul(cfg.max_attempts_per_row.max(1));
    let mut flat = Vec::with_capacity(n * FEATURES.len());
    let mut ivs = Vec::with_capacity(n);
    let mut failures = 0usize;
    let mut attempts = 0usize;
    while ivs.len() < n {
        if attempts >= budget {
            return Err(Error::BudgetExhausted(format!(
                "{failures} failed inversions after {attempts} draws for {n} rows"
            )));
        }
        attempts += 1;
        let k = uniform(&mut rng, r.moneyness);
        let t = uniform(&mut rng, r.maturity);
        let params = HestonParams {
            rho: uniform(&mut rng, r.rho),
            kappa: uniform(&mut rng, r.kappa),
            sigma: uniform(&mut rng, r.sigma),
            theta: uniform(&mut rng, r.theta),
            v0: uniform(&mut rng, r.v0),
            rate: 0.0,
        };
        match heston_iv(&params, k, t, &cos, cfg.min_vega) {
            Ok(iv) => {
                flat.extend_from_slice(&[k, t, params.rho, params.kappa, params.sigma, params.theta, params.v0]);
                ivs.push(iv);
            }
            Err(_) => failures += 1,
        }
    }
    let inputs = Array2::from_shape_vec((n, FEATURES.len()), flat).map_err(|e| Error::Numerical(e.to_string()))?;
    let ds = Dataset::new(inputs, Array1::from(ivs), FEATURES.iter().map(|s| s.to_string()).collect())?;
    let meta = HestonDatasetMeta {
        generator: GENERATOR_VERSION.to_string(),
        rng: rng::RNG_VERSION.to_string(),
        seed,
        rows: n,
        failures,
        config: *cfg,
    };
    Ok((ds, meta))
}

/// Decodes one dataset row back into its Heston parameters.
pub fn sample_from_row(row: &[f64], iv: f64) -> HestonSample {
    HestonSample {
        moneyness: row[0],
        maturity: row[1],
        params: HestonParams {
            rho: row[2],
            kappa: row[3],
            sigma: row[4],
            theta: row[5],
            v0: row[6],
            rate: 0.0,
        },
        iv,
    }
}
