//! Semi-analytic put on the maximum of two lognormal assets.
//!
//! Conditional on the first asset's Gaussian driver, the payoff is a
//! piecewise-linear function of a single lognormal, whose partial
//! expectations are closed form. The remaining one-dimensional integral is
//! done by composite Gauss-Legendre. Used for boundary data of the
//! two-asset pricing problem; Monte Carlo remains the reference.

use super::mc::RainbowSpec;
use super::normal::{gauss_legendre, norm_cdf, norm_pdf};
use crate::error::Result;

const PANELS: usize = 64;
const NODES: usize = 16;
const Z_LO: f64 = -9.0;

pub fn rainbow_put_max(spec: &RainbowSpec) -> Result<f64> {
    spec.validate()?;
    let k = spec.strike;
    let t = spec.tau;
    let df = (-spec.rate * t).exp();
    if t == 0.0 {
        return Ok((k - spec.spot1.max(spec.spot2)).max(0.0));
    }
    let m1 = spec.spot1.ln() + (spec.rate - 0.5 * spec.sigma1 * spec.sigma1) * t;
    let m2 = spec.spot2.ln() + (spec.rate - 0.5 * spec.sigma2 * spec.sigma2) * t;
    let v1 = spec.sigma1 * t.sqrt();
    let v2 = spec.sigma2 * t.sqrt();
    let v2c = v2 * (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
    let ln_k = k.ln();

    // E[(K − max(s1, S₂))⁺] with ln S₂ ~ N(mu, v2c²)
    let inner = |z: f64| -> f64 {
        let s1 = (m1 + v1 * z).exp();
        if s1 >= k {
            return 0.0;
        }
        let mu = m2 + v2 * spec.rho * z;
        if v2c < 1e-300 {
            let s2 = mu.exp();
            return (k - s1.max(s2)).max(0.0);
        }
        let ln_s1 = s1.ln();
        let p_below_s1 = norm_cdf((ln_s1 - mu) / v2c);
        let p_below_k = norm_cdf((ln_k - mu) / v2c);
        let partial = (mu + 0.5 * v2c * v2c).exp()
            * (norm_cdf((ln_k - mu - v2c * v2c) / v2c) - norm_cdf((ln_s1 - mu - v2c * v2c) / v2c));
        (k - s1) * p_below_s1 + k * (p_below_k - p_below_s1) - partial
    };

    let z_hi = if v1 > 0.0 { ((ln_k - m1) / v1).min(9.0) } else { 9.0 };
    if v1 == 0.0 {
        return Ok(df * inner(0.0));
    }
    if z_hi <= Z_LO {
        return Ok(0.0);
    }
    let (x, w) = gauss_legendre(NODES);
    let h = (z_hi - Z_LO) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let mid = Z_LO + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            let z = mid + 0.5 * h * xi;
            total += 0.5 * h * wi * norm_pdf(z) * inner(z);
        }
    }
    Ok(df * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs::{bs_price, BsParams, OptionKind};
    use crate::oracles::mc::mc_rainbow_put_max;

    fn spec(rho: f64) -> RainbowSpec {
        RainbowSpec {
            spot1: 19.0,
            spot2: 21.0,
            strike: 20.0,
            rate: 0.04,
            sigma1: 0.25,
            sigma2: 0.25,
            rho,
            tau: 1.0,
        }
    }

    #[test]
    fn agrees_with_monte_carlo() {
        for rho in [0.0, -0.95, 0.6] {
            let q = rainbow_put_max(&spec(rho)).unwrap();
            let mc = mc_rainbow_put_max(&spec(rho), 4_000_000, 1).unwrap();
            assert!(mc.agrees_with(q, 3.0), "rho={rho}: {q} vs {mc:?}");
        }
    }

    #[test]
    fn tiny_second_asset_reduces_to_vanilla() {
        let s = RainbowSpec { spot2: 1e-6, ..spec(0.0) };
        let q = rainbow_put_max(&s).unwrap();
        let bs = bs_price(&BsParams::new(19.0, 20.0, 0.04, 0.25, 1.0).unwrap(), OptionKind::Put);
        assert!((q - bs).abs() < 1e-9, "{q} vs {bs}");
    }

    #[test]
    fn perfect_correlation_equal_assets_is_vanilla() {
        let s = RainbowSpec { spot2: 19.0, rho: 1.0, ..spec(1.0) };
        let q = rainbow_put_max(&s).unwrap();
        let bs = bs_price(&BsParams::new(19.0, 20.0, 0.04, 0.25, 1.0).unwrap(), OptionKind::Put);
        assert!((q - bs).abs() < 1e-9, "{q} vs {bs}");
    }
}
