//! Pricing problems in log-price coordinates `u = ln S`.
//!
//! Each preset builds a [`PdeProblem`], supplies the reference price used for
//! error reporting and an evaluation grid in `(S, τ)`.

use std::sync::Arc;

use ndarray::{array, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::PdeProblem;
use crate::error::{Error, Result};
use crate::oracles::{bs_price, double_barrier_call, rainbow_put_max, BarrierSpec, BsParams, OptionKind, RainbowSpec};

/// Number of image-series term pairs used for barrier reference values.
const BARRIER_TERMS: usize = 50;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// European put under Black-Scholes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsPut {
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub horizon: f64,
    /// Box `[ln(lo_mult·K), ln(hi_mult·K)]`.
    pub lo_mult: f64,
    pub hi_mult: f64,
}

impl Default for BsPut {
    fn default() -> Self {
        Self {
            strike: 15.0,
            rate: 0.04,
            sigma: 0.25,
            horizon: 1.0,
            lo_mult: 0.1,
            hi_mult: 4.0,
        }
    }
}

impl BsPut {
    pub fn truth(&self, spot: f64, tau: f64) -> f64 {
        bs_price(
            &BsParams {
                spot,
                strike: self.strike,
                rate: self.rate,
                sigma: self.sigma,
                tau,
            },
            OptionKind::Put,
        )
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        for (n, v) in [("strike", self.strike), ("sigma", self.sigma), ("horizon", self.horizon), ("lo_mult", self.lo_mult)] {
            positive(n, v)?;
        }
        if !(self.hi_mult > self.lo_mult) {
            return Err(Error::invalid("hi_mult must exceed lo_mult"));
        }
        let half_var = 0.5 * self.sigma * self.sigma;
        let me = *self;
        let k = self.strike;
        Ok(PdeProblem {
            name: "bs_put".into(),
            diffusion: array![[half_var]],
            drift: array![self.rate - half_var],
            discount: self.rate,
            rhs: Arc::new(|_, _| 0.0),
            lo: vec![(self.lo_mult * k).ln()],
            hi: vec![(self.hi_mult * k).ln()],
            horizon: self.horizon,
            terminal: Arc::new(move |x| (k - x[0].exp()).max(0.0)),
            boundary: Arc::new(move |x, t| me.truth(x[0].exp(), me.horizon - t)),
        })
    }

    /// Rows `(ln S, t)` for `S` evenly spaced on `[s_lo, s_hi]` at `τ = T − t`.
    pub fn line(&self, s_lo: f64, s_hi: f64, n: usize, tau: f64) -> (Vec<f64>, Array2<f64>) {
        let spots = linspace(s_lo, s_hi, n);
        let pts = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { spots[i].ln() } else { self.horizon - tau });
        (spots, pts)
    }

    /// Default evaluation line: `S ∈ [0.2K, 3K]` at `t = 0`.
    pub fn eval_line(&self, n: usize) -> (Vec<f64>, Array2<f64>) {
        self.line(0.2 * self.strike, 3.0 * self.strike, n, self.horizon)
    }

    /// `(τ, S)` grid with `τ` at tenths of the horizon and the default spot range.
    pub fn eval_grid(&self, n_spot: usize) -> Vec<(f64, Vec<f64>, Array2<f64>)> {
        (1..=10)
            .map(|i| {
                let tau = self.horizon * i as f64 / 10.0;
                let (s, p) = self.line(0.2 * self.strike, 3.0 * self.strike, n_spot, tau);
                (tau, s, p)
            })
            .collect()
    }

    pub fn truth_on(&self, spots: &[f64], tau: f64) -> Array1<f64> {
        spots.iter().map(|&s| self.truth(s, tau)).collect()
    }
}

/// Put on the maximum of two correlated assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainbowMaxPut {
    pub strike: f64,
    pub rate: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub horizon: f64,
    pub lo_mult: f64,
    pub hi_mult: f64,
}

impl Default for RainbowMaxPut {
    fn default() -> Self {
        Self {
            strike: 20.0,
            rate: 0.04,
            sigma1: 0.25,
            sigma2: 0.25,
            rho: 0.0,
            horizon: 1.0,
            lo_mult: 0.35,
            hi_mult: 2.0,
        }
    }
}

impl RainbowMaxPut {
    pub fn spec(&self, s1: f64, s2: f64, tau: f64) -> RainbowSpec {
        RainbowSpec {
            spot1: s1,
            spot2: s2,
            strike: self.strike,
            rate: self.rate,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            rho: self.rho,
            tau,
        }
    }

    /// Semi-analytic value by quadrature.
    pub fn truth(&self, s1: f64, s2: f64, tau: f64) -> Result<f64> {
        rainbow_put_max(&self.spec(s1, s2, tau))
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        for (n, v) in [
            ("strike", self.strike),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("horizon", self.horizon),
            ("lo_mult", self.lo_mult),
        ] {
            positive(n, v)?;
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::invalid(format!("correlation {} outside [-1, 1]", self.rho)));
        }
        if !(self.hi_mult > self.lo_mult) {
            return Err(Error::invalid("hi_mult must exceed lo_mult"));
        }
        let (s1, s2) = (self.sigma1, self.sigma2);
        let cross = 0.5 * self.rho * s1 * s2;
        let me = *self;
        let k = self.strike;
        let (lo, hi) = ((self.lo_mult * k).ln(), (self.hi_mult * k).ln());
        Ok(PdeProblem {
            name: "rainbow_max_put".into(),
            diffusion: array![[0.5 * s1 * s1, cross], [cross, 0.5 * s2 * s2]],
            drift: array![self.rate - 0.5 * s1 * s1, self.rate - 0.5 * s2 * s2],
            discount: self.rate,
            rhs: Arc::new(|_, _| 0.0),
            lo: vec![lo, lo],
            hi: vec![hi, hi],
            horizon: self.horizon,
            terminal: Arc::new(move |x| (k - x[0].exp().max(x[1].exp())).max(0.0)),
            boundary: Arc::new(move |x, t| me.truth(x[0].exp(), x[1].exp(), me.horizon - t).unwrap_or(f64::NAN)),
        })
    }

    /// `n × n` grid of `(S₁, S₂)` on `[s_lo, s_hi]²` at `t = 0`, as rows `(ln S₁, ln S₂, 0)`.
    pub fn eval_grid(&self, s_lo: f64, s_hi: f64, n: usize) -> (Vec<(f64, f64)>, Array2<f64>) {
        let axis = linspace(s_lo, s_hi, n);
        let spots: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
        let pts = Array2::from_shape_fn((spots.len(), 3), |(i, j)| match j {
            0 => spots[i].0.ln(),
            1 => spots[i].1.ln(),
            _ => 0.0,
        });
        (spots, pts)
    }
}

/// Knock-out double-barrier call on the corridor `[E, F]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleBarrierCall {
    pub lower: f64,
    pub upper: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl Default for DoubleBarrierCall {
    fn default() -> Self {
        Self {
            lower: 10.0,
            upper: 30.0,
            strike: 20.0,
            rate: 0.04,
            sigma: 0.15,
            horizon: 1.0,
        }
    }
}

impl DoubleBarrierCall {
    pub fn spec(&self, spot: f64, tau: f64) -> BarrierSpec {
        BarrierSpec {
            spot,
            lower: self.lower,
            upper: self.upper,
            strike: self.strike,
            rate: self.rate,
            sigma: self.sigma,
            tau,
        }
    }

    /// Image-series value.
    pub fn truth(&self, spot: f64, tau: f64) -> Result<f64> {
        Ok(double_barrier_call(&self.spec(spot, tau), BARRIER_TERMS)?.price)
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        positive("sigma", self.sigma)?;
        positive("horizon", self.horizon)?;
        self.spec(self.strike, self.horizon).validate()?;
        let half_var = 0.5 * self.sigma * self.sigma;
        let k = self.strike;
        Ok(PdeProblem {
            name: "double_barrier_call".into(),
            diffusion: array![[half_var]],
            drift: array![self.rate - half_var],
            discount: self.rate,
            rhs: Arc::new(|_, _| 0.0),
            lo: vec![self.lower.ln()],
            hi: vec![self.upper.ln()],
            horizon: self.horizon,
            terminal: Arc::new(move |x| (x[0].exp() - k).max(0.0)),
            boundary: Arc::new(|_, _| 0.0),
        })
    }

    /// `n` spots strictly inside `(E, F)` at `t = 0`.
    pub fn eval_line(&self, n: usize) -> (Vec<f64>, Array2<f64>) {
        let h = (self.upper - self.lower) / (n + 1) as f64;
        let spots: Vec<f64> = (1..=n).map(|i| self.lower + h * i as f64).collect();
        let pts = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { spots[i].ln() } else { 0.0 });
        (spots, pts)
    }
}
