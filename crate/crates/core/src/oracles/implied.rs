use super::bs::{bs_price, bs_vega, no_arbitrage_bounds, BsParams, OptionKind};
use crate::error::{Error, Result};

pub const IV_MIN: f64 = 1e-4;
pub const IV_MAX: f64 = 5.0;
const PRICE_TOL: f64 = 1e-10;

/// Black-Scholes volatility reproducing `price`, searched on
/// `[IV_MIN, IV_MAX]` by Newton steps safeguarded with bisection.
pub fn implied_vol(price: f64, spot: f64, strike: f64, rate: f64, tau: f64, kind: OptionKind) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && tau > 0.0) || !price.is_finite() || !rate.is_finite() {
        return Err(Error::invalid("implied vol needs positive spot, strike and maturity"));
    }
    let (lower, upper) = no_arbitrage_bounds(spot, strike, rate, tau, kind);
    if price <= lower || price >= upper {
        return Err(Error::NoSolution(format!(
            "price {price} outside the no-arbitrage band ({lower}, {upper})"
        )));
    }
    let at = |sigma: f64| BsParams {
        spot,
        strike,
        rate,
        sigma,
        tau,
    };
    let f = |sigma: f64| bs_price(&at(sigma), kind) - price;
    let (mut lo, mut hi) = (IV_MIN, IV_MAX);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoSolution(format!(
            "price {price} not bracketed by σ ∈ [{IV_MIN}, {IV_MAX}]"
        )));
    }
    let mut sigma = initial_guess(price, spot, strike, rate, tau).clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(sigma);
        if fx > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = bs_vega(&at(sigma));
        let newton = sigma - fx / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - sigma).abs();
        sigma = next;
        if (fx.abs() <= PRICE_TOL && step <= 1e-12 * sigma) || hi - lo <= 1e-15 {
            return Ok(sigma);
        }
    }
    if f(sigma).abs() <= PRICE_TOL {
        Ok(sigma)
    } else {
        Err(Error::NoSolution(format!("implied vol did not converge for price {price}")))
    }
}

// Brenner-Subrahmanyam style start, adjusted for moneyness.
fn initial_guess(price: f64, spot: f64, strike: f64, rate: f64, tau: f64) -> f64 {
    let fwd_ln = (spot / (strike * (-rate * tau).exp())).ln().abs();
    let atm = (2.0 * std::f64::consts::PI / tau).sqrt() * price / spot;
    (atm.max(0.0) + (2.0 * fwd_ln / tau).sqrt()).max(0.05)
}
