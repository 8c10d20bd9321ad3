//! Knock-out double-barrier call by image expansion.
//!
//! The value is a symmetric series over reflections of the log-price across
//! the two barriers. With barrier levels `E < F`, corridor width
//! `δ = ln F − ln E` and `c = 2|r|/σ² + 1`, the `n`-th term pairs the factors
//! `(F/E)^{n c}` and `(E^{n+1} / (F^n S))^{c}` with normal-CDF differences at
//! the arguments `d_{1..4,n}`; the strike leg uses exponent `c − 2` and
//! arguments shifted by `σ√τ`.

use super::normal::norm_cdf_diff;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub spot: f64,
    /// Lower knock-out level `E`.
    pub lower: f64,
    /// Upper knock-out level `F`.
    pub upper: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl BarrierSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.spot, self.lower, self.upper, self.strike, self.rate, self.sigma, self.tau]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.spot <= 0.0 || self.sigma <= 0.0 || self.tau < 0.0 {
            return Err(Error::invalid(format!("invalid barrier parameters {self:?}")));
        }
        if !(0.0 < self.lower && self.lower < self.strike && self.strike < self.upper) {
            return Err(Error::invalid(format!(
                "barrier call needs 0 < E < K < F, got E={} K={} F={}",
                self.lower, self.strike, self.upper
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierPrice {
    pub price: f64,
    /// Magnitude of the last included term pair `n = ±n_terms`.
    pub last_term: f64,
    /// False when `last_term > 1e-10 · price`.
    pub converged: bool,
}

/// Series value truncated to `n ∈ [−n_terms, n_terms]`.
pub fn double_barrier_call(b: &BarrierSpec, n_terms: usize) -> Result<BarrierPrice> {
    b.validate()?;
    if n_terms == 0 {
        return Err(Error::invalid("n_terms must be >= 1"));
    }
    let s = b.spot;
    if s <= b.lower || s >= b.upper {
        return Ok(BarrierPrice {
            price: 0.0,
            last_term: 0.0,
            converged: true,
        });
    }
    if b.tau == 0.0 {
        return Ok(BarrierPrice {
            price: (s - b.strike).max(0.0),
            last_term: 0.0,
            converged: true,
        });
    }

    let (sig, tau, r) = (b.sigma, b.tau, b.rate);
    let sd = sig * tau.sqrt();
    let drift = (r + 0.5 * sig * sig) * tau;
    let (ln_e, ln_f, ln_s, ln_k) = (b.lower.ln(), b.upper.ln(), s.ln(), b.strike.ln());
    let width = ln_f - ln_e;
    let c = 2.0 * r.abs() / (sig * sig) + 1.0;
    let df = (-r * tau).exp();

    let term = |n: i64| -> f64 {
        let nf = n as f64;
        let shift = 2.0 * nf * width;
        let d1 = (ln_s - ln_k + shift + drift) / sd;
        let d2 = (ln_s - ln_f + shift + drift) / sd;
        let d3 = (2.0 * ln_e - ln_k - ln_s - shift + drift) / sd;
        let d4 = (2.0 * ln_e - ln_f - ln_s - shift + drift) / sd;
        // log of (F/E)^n and of E^{n+1} / (F^n S)
        let la = nf * width;
        let lb = (nf + 1.0) * ln_e - nf * ln_f - ln_s;
        let spot_leg = weighted(c * la, norm_cdf_diff(d1, d2)) - weighted(c * lb, norm_cdf_diff(d3, d4));
        let strike_leg = weighted((c - 2.0) * la, norm_cdf_diff(d1 - sd, d2 - sd))
            - weighted((c - 2.0) * lb, norm_cdf_diff(d3 - sd, d4 - sd));
        s * spot_leg - b.strike * df * strike_leg
    };

    let mut price = term(0);
    let mut last = 0.0;
    for n in 1..=n_terms as i64 {
        let pair = term(n) + term(-n);
        price += pair;
        last = pair.abs();
    }
    let price = price.max(0.0);
    Ok(BarrierPrice {
        price,
        last_term: last,
        converged: last <= 1e-10 * price.max(f64::MIN_POSITIVE),
    })
}

// exp(log_factor) * diff, returning 0 when the difference vanishes so that an
// overflowing factor never produces inf * 0.
#[inline]
fn weighted(log_factor: f64, diff: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        (log_factor + diff.abs().ln()).exp() * diff.signum()
    }
}
