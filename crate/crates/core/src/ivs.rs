//! Implied-volatility surface: quote cleaning, ELM fit over `(T, k)` and the
//! static-arbitrage audit on a call-price grid.
//!
//! `k = ln(K / F)` with `F = S e^{rT}`.

use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::Dataset;
use crate::elm::{ElmModel, HiddenLayer};
use crate::error::{Error, Result};
use crate::metrics::{mae, rmse};
use crate::oracles::bs::no_arbitrage_bounds;
use crate::oracles::{bs_price, BsParams, OptionKind};
use crate::rng;

pub const K_RANGE: (f64, f64) = (-1.2, 0.3);
pub const MAX_MATURITY: f64 = 3.0;
/// Discrete differences below `−DIFF_TOL` count as violations.
pub const DIFF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvQuote {
    pub date: String,
    #[serde(rename = "K")]
    pub strike: f64,
    #[serde(rename = "S")]
    pub spot: f64,
    #[serde(rename = "r")]
    pub rate: f64,
    #[serde(rename = "T")]
    pub maturity: f64,
    pub iv: Option<f64>,
    pub kind: OptionKind,
}

impl IvQuote {
    pub fn log_moneyness(&self) -> f64 {
        (self.strike / self.spot).ln() - self.rate * self.maturity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    InvalidInput,
    MissingIv,
    Maturity,
    Moneyness,
    InTheMoney,
    StaticBounds,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::InvalidInput => "invalid-input",
            RejectReason::MissingIv => "missing-iv",
            RejectReason::Maturity => "maturity",
            RejectReason::Moneyness => "moneyness",
            RejectReason::InTheMoney => "in-the-money",
            RejectReason::StaticBounds => "static-bounds",
        })
    }
}

/// First failing rule, checked in the order of [`RejectReason`].
pub fn reject_reason(q: &IvQuote) -> Option<RejectReason> {
    let finite = [q.strike, q.spot, q.rate, q.maturity].iter().all(|v| v.is_finite());
    if !finite || q.strike <= 0.0 || q.spot <= 0.0 || q.maturity <= 0.0 {
        return Some(RejectReason::InvalidInput);
    }
    let iv = match q.iv {
        Some(v) if v.is_finite() && v > 0.0 => v,
        _ => return Some(RejectReason::MissingIv),
    };
    if q.maturity > MAX_MATURITY {
        return Some(RejectReason::Maturity);
    }
    let k = q.log_moneyness();
    if !(K_RANGE.0..=K_RANGE.1).contains(&k) {
        return Some(RejectReason::Moneyness);
    }
    let itm = match q.kind {
        OptionKind::Put => k > 0.0,
        OptionKind::Call => k < 0.0,
    };
    if itm {
        return Some(RejectReason::InTheMoney);
    }
    let price = bs_price(
        &BsParams {
            spot: q.spot,
            strike: q.strike,
            rate: q.rate,
            sigma: iv,
            tau: q.maturity,
        },
        q.kind,
    );
    let (lo, hi) = no_arbitrage_bounds(q.spot, q.strike, q.rate, q.maturity, q.kind);
    if !price.is_finite() || price < lo || price > hi {
        return Some(RejectReason::StaticBounds);
    }
    None
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cleaned {
    pub kept: Vec<IvQuote>,
    pub rejected: Vec<(IvQuote, RejectReason)>,
}

impl Cleaned {
    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejected.iter().filter(|(_, r)| *r == reason).count()
    }
}

pub fn clean_quotes(raw: &[IvQuote]) -> Cleaned {
    let mut out = Cleaned::default();
    for q in raw {
        match reject_reason(q) {
            None => out.kept.push(q.clone()),
            Some(r) => out.rejected.push((q.clone(), r)),
        }
    }
    out
}

pub fn read_quotes_csv(path: impl AsRef<Path>) -> Result<Vec<IvQuote>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_quotes_csv(path: impl AsRef<Path>, quotes: &[IvQuote]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for q in quotes {
        w.serialize(q)?;
    }
    w.flush()?;
    Ok(())
}

/// Smooth smile `a + b·k + c·k² + d·√T`, floored at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSurface {
    pub atm: f64,
    pub skew: f64,
    pub curvature: f64,
    pub term: f64,
    pub floor: f64,
}

impl SyntheticSurface {
    pub fn flat(sigma: f64) -> Self {
        Self {
            atm: sigma,
            skew: 0.0,
            curvature: 0.0,
            term: 0.0,
            floor: 0.0,
        }
    }

    pub fn smile() -> Self {
        Self {
            atm: 0.18,
            skew: -0.2,
            curvature: 0.25,
            term: 0.03,
            floor: 0.05,
        }
    }

    pub fn iv(&self, t: f64, k: f64) -> f64 {
        (self.atm + self.skew * k + self.curvature * k * k + self.term * t.sqrt()).max(self.floor)
    }
}

/// Maturity buckets in days and log-moneyness buckets with the quote counts of
/// a cleaned two-month S&P 500 sample (rows: moneyness, columns: maturity).
const MATURITY_DAYS: [(f64, f64); 5] = [(1.0, 7.0), (7.0, 30.0), (30.0, 90.0), (90.0, 365.0), (365.0, 1095.0)];
const MONEYNESS: [(f64, f64); 5] = [(-1.2, -0.9), (-0.9, -0.6), (-0.6, -0.3), (-0.3, 0.0), (0.0, 0.3)];
const BUCKET_COUNTS: [[u32; 5]; 5] = [
    [8, 134, 262, 1114, 459],
    [26, 194, 417, 2430, 917],
    [177, 725, 1421, 8480, 2934],
    [1291, 5769, 11378, 23659, 5627],
    [792, 4194, 7435, 16967, 3940],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub spot: f64,
    pub rate: f64,
    /// Standard deviation of additive Gaussian noise on IV.
    pub noise: f64,
    pub surface: SyntheticSurface,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n: 2658,
            spot: 1.0,
            rate: 0.0,
            noise: 0.0,
            surface: SyntheticSurface::smile(),
        }
    }
}

/// Out-of-the-money quotes whose `(T, k)` histogram follows the bucket table;
/// every quote passes [`clean_quotes`] when `noise` keeps IV positive.
pub fn synthetic_chain(cfg: &ChainConfig, seed: u64) -> Result<Vec<IvQuote>> {
    if !(cfg.spot > 0.0) || !cfg.rate.is_finite() || !(cfg.noise >= 0.0) {
        return Err(Error::invalid(format!("invalid chain config {cfg:?}")));
    }
    let total: u32 = BUCKET_COUNTS.iter().flatten().sum();
    let mut r = rng::stream(seed, "ivs-chain");
    let mut out = Vec::with_capacity(cfg.n);
    while out.len() < cfg.n {
        let mut u = r.random_range(0..total);
        let (mut im, mut it) = (0, 0);
        'find: for (i, row) in BUCKET_COUNTS.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if u < c {
                    (im, it) = (i, j);
                    break 'find;
                }
                u -= c;
            }
        }
        let (d0, d1) = MATURITY_DAYS[it];
        let t = r.random_range(d0..=d1) / 365.0;
        let (k0, k1) = MONEYNESS[im];
        let k = r.random_range(k0..=k1);
        let noise = if cfg.noise > 0.0 {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
            cfg.noise * z
        } else {
            0.0
        };
        let iv = cfg.surface.iv(t, k) + noise;
        if iv <= 0.0 {
            continue;
        }
        let strike = cfg.spot * (k + cfg.rate * t).exp();
        let kind = if k > 0.0 { OptionKind::Call } else { OptionKind::Put };
        out.push(IvQuote {
            date: format!("day-{seed}"),
            strike,
            spot: cfg.spot,
            rate: cfg.rate,
            maturity: t,
            iv: Some(iv),
            kind,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub nodes: usize,
    pub scale: f64,
    pub activation: Activation,
    pub ridge: f64,
    pub train_frac: f64,
    pub seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            nodes: 1000,
            scale: 0.5,
            activation: Activation::Tanh,
            ridge: 1e-6,
            train_frac: 0.8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceFit {
    /// ELM over `(T, k)`.
    pub model: ElmModel,
    pub n_train: usize,
    pub n_test: usize,
    pub rmse: f64,
    pub mae: f64,
    pub seed: u64,
}

/// `(T, k) → iv` dataset from quotes with an IV.
pub fn quotes_dataset(quotes: &[IvQuote]) -> Result<Dataset> {
    let rows: Vec<&IvQuote> = quotes.iter().filter(|q| q.iv.is_some()).collect();
    let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| if j == 0 { rows[i].maturity } else { rows[i].log_moneyness() });
    let y = Array1::from_iter(rows.iter().map(|q| q.iv.unwrap()));
    Dataset::new(x, y, vec!["T".into(), "k".into()])
}

pub fn fit_surface(quotes: &[IvQuote], cfg: &SurfaceConfig) -> Result<SurfaceFit> {
    if quotes.len() < 10 {
        return Err(Error::invalid(format!("surface fit needs at least 10 quotes, got {}", quotes.len())));
    }
    let ds = quotes_dataset(quotes)?;
    let (train, test) = ds.split(cfg.train_frac, cfg.seed)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("degenerate train/test split"));
    }
    let layer = HiddenLayer::random(2, cfg.nodes, cfg.scale, cfg.activation, cfg.seed)?;
    let model = ElmModel::fit(layer, train.inputs.view(), train.targets.view(), cfg.ridge)?;
    let pred = model.predict(test.inputs.view())?;
    let (p, t) = (pred.as_slice().unwrap(), test.targets.as_slice().unwrap());
    Ok(SurfaceFit {
        rmse: rmse(p, t)?,
        mae: mae(p, t)?,
        model,
        n_train: train.len(),
        n_test: test.len(),
        seed: cfg.seed,
    })
}

/// Anything that returns IV for rows `(T, k)`.
pub trait IvSurface {
    fn iv_batch(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>>;
}

impl IvSurface for ElmModel {
    fn iv_batch(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.predict(pts)
    }
}

impl IvSurface for SurfaceFit {
    fn iv_batch(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.model.predict(pts)
    }
}

impl IvSurface for SyntheticSurface {
    fn iv_batch(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(pts.rows().into_iter().map(|r| self.iv(r[0], r[1])).collect())
    }
}

impl<F: Fn(f64, f64) -> f64> IvSurface for F {
    fn iv_batch(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(pts.rows().into_iter().map(|r| self(r[0], r[1])).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub k_lo: f64,
    pub k_hi: f64,
    pub n_k: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub n_t: usize,
    pub spot: f64,
    pub rate: f64,
}

impl Default for AuditGrid {
    fn default() -> Self {
        Self {
            k_lo: 0.7,
            k_hi: 1.2,
            n_k: 100,
            t_lo: 0.05,
            t_hi: 1.0,
            n_t: 100,
            spot: 1.0,
            rate: 0.0,
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl AuditGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_k < 3 || self.n_t < 2 || !(self.k_hi > self.k_lo && self.k_lo > 0.0) || !(self.t_hi > self.t_lo && self.t_lo > 0.0) || !(self.spot > 0.0) {
            return Err(Error::invalid(format!("invalid audit grid {self:?}")));
        }
        Ok(())
    }

    pub fn strikes(&self) -> Vec<f64> {
        axis(self.k_lo, self.k_hi, self.n_k)
    }

    pub fn maturities(&self) -> Vec<f64> {
        axis(self.t_lo, self.t_hi, self.n_t)
    }

    /// Call prices, `n_t × n_k`, from the surface evaluated at `(T, ln(K/F))`.
    pub fn call_prices(&self, surface: &dyn IvSurface) -> Result<Array2<f64>> {
        self.validate()?;
        let (ks, ts) = (self.strikes(), self.maturities());
        let pts = Array2::from_shape_fn((self.n_t * self.n_k, 2), |(c, j)| {
            let (it, ik) = (c / self.n_k, c % self.n_k);
            if j == 0 {
                ts[it]
            } else {
                (ks[ik] / self.spot).ln() - self.rate * ts[it]
            }
        });
        let iv = surface.iv_batch(pts.view())?;
        if iv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("surface returned non-finite IV on the audit grid".into()));
        }
        Ok(Array2::from_shape_fn((self.n_t, self.n_k), |(it, ik)| {
            bs_price(
                &BsParams {
                    spot: self.spot,
                    strike: ks[ik],
                    rate: self.rate,
                    sigma: iv[it * self.n_k + ik].max(0.0),
                    tau: ts[it],
                },
                OptionKind::Call,
            )
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `C(K, ·)` non-decreasing in `T`, per strike.
    MonotoneT,
    /// `C(·, T)` non-increasing in `K`, per maturity.
    MonotoneK,
    /// `C(·, T)` convex in `K`, per maturity.
    ConvexK,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::MonotoneT, Condition::MonotoneK, Condition::ConvexK];

    pub fn name(self) -> &'static str {
        match self {
            Condition::MonotoneT => "dC_dT",
            Condition::MonotoneK => "dC_dK",
            Condition::ConvexK => "d2C_dK2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub grid: AuditGrid,
    /// Percent of strike slices violating calendar monotonicity.
    pub violation_rate_t: f64,
    /// Percent of maturity slices violating strike monotonicity.
    pub violation_rate_k: f64,
    /// Percent of maturity slices violating convexity.
    pub violation_rate_convexity: f64,
    pub violated_slices: [usize; 3],
    pub tolerance: f64,
    #[serde(skip)]
    pub prices: Array2<f64>,
}

/// Signed differences arranged so that a violation is a value `< −tol`:
/// `dC(T)`, `−dC(K)` and `d²C(K)`.
pub fn differences(prices: &Array2<f64>, cond: Condition) -> Vec<Vec<f64>> {
    let (nt, nk) = prices.dim();
    match cond {
        Condition::MonotoneT => (0..nk).map(|k| (1..nt).map(|t| prices[[t, k]] - prices[[t - 1, k]]).collect()).collect(),
        Condition::MonotoneK => (0..nt).map(|t| (1..nk).map(|k| prices[[t, k - 1]] - prices[[t, k]]).collect()).collect(),
        Condition::ConvexK => (0..nt)
            .map(|t| (1..nk - 1).map(|k| prices[[t, k + 1]] - 2.0 * prices[[t, k]] + prices[[t, k - 1]]).collect())
            .collect(),
    }
}

pub fn audit_prices(prices: Array2<f64>, grid: &AuditGrid) -> Result<ArbitrageReport> {
    if prices.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite call price on the audit grid".into()));
    }
    let mut violated = [0usize; 3];
    let mut rates = [0.0; 3];
    for (i, cond) in Condition::ALL.iter().enumerate() {
        let slices = differences(&prices, *cond);
        violated[i] = slices.iter().filter(|s| s.iter().any(|&d| d < -DIFF_TOL)).count();
        rates[i] = 100.0 * violated[i] as f64 / slices.len() as f64;
    }
    Ok(ArbitrageReport {
        grid: *grid,
        violation_rate_t: rates[0],
        violation_rate_k: rates[1],
        violation_rate_convexity: rates[2],
        violated_slices: violated,
        tolerance: DIFF_TOL,
        prices,
    })
}

pub fn arbitrage_report(surface: &dyn IvSurface, grid: &AuditGrid) -> Result<ArbitrageReport> {
    let prices = grid.call_prices(surface)?;
    audit_prices(prices, grid)
}

impl ArbitrageReport {
    /// Long-format difference vectors: `condition, slice, slice_value, index, grid_value, diff`.
    /// `diff` is the raw `dC(T)`, `dC(K)` or `d²C(K)`.
    pub fn differences_csv(&self) -> Result<String> {
        let (ks, ts) = (self.grid.strikes(), self.grid.maturities());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["condition", "slice", "slice_value", "index", "grid_value", "diff"])?;
        for cond in Condition::ALL {
            let (slice_axis, grid_axis, sign) = match cond {
                Condition::MonotoneT => (&ks, &ts, 1.0),
                Condition::MonotoneK => (&ts, &ks, -1.0),
                Condition::ConvexK => (&ts, &ks, 1.0),
            };
            for (s, diffs) in differences(&self.prices, cond).iter().enumerate() {
                for (j, d) in diffs.iter().enumerate() {
                    let g = if cond == Condition::ConvexK { grid_axis[j + 1] } else { grid_axis[j] };
                    w.write_record([
                        cond.name().to_string(),
                        s.to_string(),
                        format!("{:e}", slice_axis[s]),
                        j.to_string(),
                        format!("{g:e}"),
                        format!("{:e}", sign * d),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }

    pub fn write_differences_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.differences_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(k: f64, t: f64, kind: OptionKind) -> IvQuote {
        IvQuote {
            date: "d".into(),
            strike: k.exp(),
            spot: 1.0,
            rate: 0.0,
            maturity: t,
            iv: Some(0.2),
            kind,
        }
    }

    #[test]
    fn itm_put_rejected() {
        assert_eq!(reject_reason(&quote(0.2, 0.5, OptionKind::Put)), Some(RejectReason::InTheMoney));
        assert_eq!(reject_reason(&quote(-0.2, 0.5, OptionKind::Call)), Some(RejectReason::InTheMoney));
        assert_eq!(reject_reason(&quote(0.2, 0.5, OptionKind::Call)), None);
    }

    #[test]
    fn long_maturity_rejected() {
        assert_eq!(reject_reason(&quote(-0.1, 3.5, OptionKind::Put)), Some(RejectReason::Maturity));
    }

    #[test]
    fn moneyness_and_missing_iv_rejected() {
        assert_eq!(reject_reason(&quote(-1.3, 0.5, OptionKind::Put)), Some(RejectReason::Moneyness));
        assert_eq!(reject_reason(&quote(0.31, 0.5, OptionKind::Call)), Some(RejectReason::Moneyness));
        let q = IvQuote { iv: None, ..quote(-0.1, 0.5, OptionKind::Put) };
        assert_eq!(reject_reason(&q), Some(RejectReason::MissingIv));
    }

    #[test]
    fn flat_surface_has_no_violations() {
        let rep = arbitrage_report(&SyntheticSurface::flat(0.2), &AuditGrid::default()).unwrap();
        assert_eq!(rep.violated_slices, [0, 0, 0]);
    }
}
