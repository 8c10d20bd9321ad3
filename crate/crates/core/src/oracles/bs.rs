//! Black-Scholes closed forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::normal::{norm_cdf, norm_pdf};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "call" | "c" => Ok(OptionKind::Call),
            "put" | "p" => Ok(OptionKind::Put),
            other => Err(Error::Parse(format!("unknown option kind `{other}`"))),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsParams {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    /// Time to maturity in years.
    pub tau: f64,
}

impl BsParams {
    pub fn new(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> Result<Self> {
        let p = Self {
            spot,
            strike,
            rate,
            sigma,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.spot > 0.0
            && self.strike > 0.0
            && self.sigma >= 0.0
            && self.tau >= 0.0
            && [self.spot, self.strike, self.rate, self.sigma, self.tau]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Black-Scholes parameters {self:?}")))
        }
    }

    fn d1_d2(&self) -> (f64, f64) {
        let sd = self.sigma * self.tau.sqrt();
        let d1 = ((self.spot / self.strike).ln() + (self.rate + 0.5 * self.sigma * self.sigma) * self.tau) / sd;
        (d1, d1 - sd)
    }
}

/// Black-Scholes value; intrinsic at `tau = 0`, discounted forward payoff at
/// `sigma = 0`.
pub fn bs_price(p: &BsParams, kind: OptionKind) -> f64 {
    let df = (-p.rate * p.tau).exp();
    if p.tau == 0.0 || p.sigma == 0.0 {
        let fwd = p.spot / df;
        let payoff = match kind {
            OptionKind::Call => (fwd - p.strike).max(0.0),
            OptionKind::Put => (p.strike - fwd).max(0.0),
        };
        return df * payoff;
    }
    let (d1, d2) = p.d1_d2();
    match kind {
        OptionKind::Call => p.spot * norm_cdf(d1) - p.strike * df * norm_cdf(d2),
        OptionKind::Put => p.strike * df * norm_cdf(-d2) - p.spot * norm_cdf(-d1),
    }
}

/// `∂V/∂σ`, identical for calls and puts.
pub fn bs_vega(p: &BsParams) -> f64 {
    if p.tau == 0.0 || p.sigma == 0.0 {
        return 0.0;
    }
    let (d1, _) = p.d1_d2();
    p.spot * norm_pdf(d1) * p.tau.sqrt()
}

/// Model-free bounds `(lower, upper)` on a European price.
pub fn no_arbitrage_bounds(spot: f64, strike: f64, rate: f64, tau: f64, kind: OptionKind) -> (f64, f64) {
    let dk = strike * (-rate * tau).exp();
    match kind {
        OptionKind::Call => ((spot - dk).max(0.0), spot),
        OptionKind::Put => ((dk - spot).max(0.0), dk),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expiry_returns_intrinsic() {
        let p = BsParams::new(12.0, 15.0, 0.04, 0.25, 0.0).unwrap();
        assert_eq!(bs_price(&p, OptionKind::Put), 3.0);
        assert_eq!(bs_price(&p, OptionKind::Call), 0.0);
    }

    #[test]
    fn zero_vol_is_discounted_forward_payoff() {
        let p = BsParams::new(100.0, 95.0, 0.05, 0.0, 2.0).unwrap();
        let expect = (100.0 - 95.0 * (-0.1f64).exp()).max(0.0);
        assert!((bs_price(&p, OptionKind::Call) - expect).abs() < 1e-12);
        assert_eq!(bs_price(&p, OptionKind::Put), 0.0);
    }

    #[test]
    fn put_call_parity() {
        for &(s, k, r, v, t) in &[(15.0, 15.0, 0.04, 0.25, 1.0), (1.0, 1.4, -0.01, 0.8, 2.5), (50.0, 20.0, 0.1, 0.1, 0.3)] {
            let p = BsParams::new(s, k, r, v, t).unwrap();
            let lhs = bs_price(&p, OptionKind::Call) - bs_price(&p, OptionKind::Put);
            assert!((lhs - (s - k * (-r * t).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn textbook_value() {
        // Hull, Example 15.6: S=42, K=40, r=0.1, σ=0.2, T=0.5.
        let p = BsParams::new(42.0, 40.0, 0.1, 0.2, 0.5).unwrap();
        assert!((bs_price(&p, OptionKind::Call) - 4.759).abs() < 5e-4);
        assert!((bs_price(&p, OptionKind::Put) - 0.8086).abs() < 5e-4);
    }

    #[test]
    fn vega_matches_finite_difference() {
        let p = BsParams::new(15.0, 17.0, 0.04, 0.3, 0.7).unwrap();
        let h = 1e-6;
        let up = bs_price(&BsParams { sigma: 0.3 + h, ..p }, OptionKind::Call);
        let dn = bs_price(&BsParams { sigma: 0.3 - h, ..p }, OptionKind::Call);
        assert!(((up - dn) / (2.0 * h) - bs_vega(&p)).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BsParams::new(-1.0, 1.0, 0.0, 0.2, 1.0).is_err());
        assert!(BsParams::new(1.0, 1.0, 0.0, -0.2, 1.0).is_err());
        assert!(BsParams::new(1.0, 1.0, 0.0, 0.2, -1.0).is_err());
    }
}
