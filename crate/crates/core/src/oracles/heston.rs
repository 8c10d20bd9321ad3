//! Heston European prices by Fourier-cosine expansion.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::bs::OptionKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub rho: f64,
    pub kappa: f64,
    /// Volatility of variance.
    pub sigma: f64,
    pub theta: f64,
    pub v0: f64,
    pub rate: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.rho, self.kappa, self.sigma, self.theta, self.v0, self.rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.rho.abs() >= 1.0 || self.kappa <= 0.0 || self.sigma <= 0.0 || self.theta <= 0.0 || self.v0 <= 0.0 {
            return Err(Error::invalid(format!("invalid Heston parameters {self:?}")));
        }
        Ok(())
    }

    /// `ln E[exp(iu ln(S_T/S_0))]`, in the rotation-count-free form with
    /// `Re d > 0`. The `1/σ²` factors are folded analytically so the
    /// expression stays accurate as the vol-of-vol goes to zero.
    pub fn log_char(&self, u: f64, tau: f64) -> Complex64 {
        let i = Complex64::i();
        let iu = i * u;
        let s2 = self.sigma * self.sigma;
        let xi = Complex64::new(self.kappa, 0.0) - self.rho * self.sigma * iu;
        let a = u * u + iu; // u² + iu
        let d = (xi * xi + s2 * a).sqrt();
        let xpd = xi + d;
        // (ξ − d)/σ² and g = (ξ − d)/(ξ + d) = σ² q
        let xmd_over_s2 = -a / xpd;
        let q = -a / (xpd * xpd);
        let e = (-d * tau).exp();
        let d_term = xmd_over_s2 * (1.0 - e) / (1.0 - s2 * q * e);
        let log_ratio_over_s2 = ln1p_scaled(-q * e, s2) - ln1p_scaled(-q, s2);
        let c_term = iu * self.rate * tau + self.kappa * self.theta * (xmd_over_s2 * tau - 2.0 * log_ratio_over_s2);
        c_term + d_term * self.v0
    }

    /// Cumulants `(c1, c2, c4)` of `ln(S_T/S_0)` by finite differences of
    /// the log characteristic function at the origin.
    pub fn cumulants(&self, tau: f64) -> (f64, f64, f64) {
        let h = 1e-3;
        let p = self.log_char(h, tau);
        let m = self.log_char(-h, tau);
        let c1 = (p.im - m.im) / (2.0 * h);
        let c2 = (-(p.re + m.re) / (h * h)).max(0.0);
        // Re ψ(u) = −c2 u²/2 + c4 u⁴/24 − …, eliminate c2 with a step pair.
        let h4 = 0.1 / c2.sqrt().max(1e-8);
        let a = self.log_char(h4, tau).re;
        let b = self.log_char(2.0 * h4, tau).re;
        let c4 = (2.0 * (b - 4.0 * a) / h4.powi(4)).max(0.0);
        (c1, c2, c4)
    }
}

// ln(1 + s·y) / s, accurate for small s·y.
fn ln1p_scaled(y: Complex64, s: f64) -> Complex64 {
    let x = y * s;
    if x.norm() < 1e-4 {
        y * (1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0)
    } else {
        (1.0 + x).ln() / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosSettings {
    pub n_terms: usize,
    /// Truncation half-width in standard deviations of `ln(S_T/S_0)`.
    pub width: f64,
}

impl Default for CosSettings {
    fn default() -> Self {
        Self {
            n_terms: 1024,
            width: 12.0,
        }
    }
}

/// European call or put under Heston. The put is expanded directly; the call
/// comes from parity.
pub fn heston_cos_price(
    h: &HestonParams,
    spot: f64,
    strike: f64,
    tau: f64,
    kind: OptionKind,
    cos: &CosSettings,
) -> Result<f64> {
    h.validate()?;
    if cos.n_terms < 16 {
        return Err(Error::invalid("COS expansion needs at least 16 terms"));
    }
    if !(spot > 0.0 && strike > 0.0 && tau > 0.0) {
        return Err(Error::invalid("spot, strike and maturity must be positive"));
    }
    let put = cos_put(h, spot, strike, tau, cos)?;
    Ok(match kind {
        OptionKind::Put => put,
        OptionKind::Call => put + spot - strike * (-h.rate * tau).exp(),
    })
}

fn cos_put(h: &HestonParams, spot: f64, strike: f64, tau: f64, cos: &CosSettings) -> Result<f64> {
    let (c1, c2, c4) = h.cumulants(tau);
    let half = cos.width * (c2 + c4.sqrt()).sqrt();
    let (a, b) = (c1 - half, c1 + half);
    if !(b - a > 1e-12) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Numerical(format!("degenerate COS truncation interval [{a}, {b}]")));
    }
    let x_star = (strike / spot).ln();
    if x_star <= a {
        return Ok(0.0);
    }
    let upper = x_star.min(b);
    let width = b - a;
    let mut sum = 0.0;
    for k in 0..cos.n_terms {
        let u = k as f64 * PI / width;
        let (chi, psi) = chi_psi(u, a, a, upper);
        let payoff_coef = 2.0 / width * (strike * psi - spot * chi);
        let phi = h.log_char(u, tau).exp();
        let rot = Complex64::new(0.0, -u * a).exp();
        let term = (phi * rot).re * payoff_coef;
        sum += if k == 0 { 0.5 * term } else { term };
    }
    Ok(((-h.rate * tau).exp() * sum).max(0.0))
}

// χ = ∫_c^d eˣ cos(u(x−a)) dx and ψ = ∫_c^d cos(u(x−a)) dx.
fn chi_psi(u: f64, a: f64, c: f64, d: f64) -> (f64, f64) {
    let (sd, cd) = (u * (d - a)).sin_cos();
    let (sc, cc) = (u * (c - a)).sin_cos();
    let (ed, ec) = (d.exp(), c.exp());
    let chi = (cd * ed - cc * ec + u * (sd * ed - sc * ec)) / (1.0 + u * u);
    let psi = if u == 0.0 { d - c } else { (sd - sc) / u };
    (chi, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs::{bs_price, BsParams};

    fn sample() -> HestonParams {
        HestonParams {
            rho: -0.5711,
            kappa: 1.5768,
            sigma: 0.5751,
            theta: 0.0398,
            v0: 0.0175,
            rate: 0.0,
        }
    }

    #[test]
    fn char_function_is_one_at_origin() {
        let z = sample().log_char(0.0, 1.3);
        assert!(z.norm() < 1e-15);
    }

    #[test]
    fn reference_value() {
        // Published COS benchmark for this parameter set: S=K=100, T=1.
        let c = heston_cos_price(&sample(), 100.0, 100.0, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
        assert!((c - 5.785_155_450).abs() < 1e-6, "{c}");
    }

    #[test]
    fn fast_mean_reversion_collapses_to_black_scholes() {
        let h = HestonParams {
            rho: -0.5,
            kappa: 50.0,
            sigma: 1e-4,
            theta: 0.04,
            v0: 0.04,
            rate: 0.03,
        };
        for &k in &[80.0, 100.0, 120.0] {
            let c = heston_cos_price(&h, 100.0, k, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
            let bs = bs_price(&BsParams::new(100.0, k, 0.03, 0.2, 1.0).unwrap(), OptionKind::Call);
            assert!((c - bs).abs() < 1e-4, "K={k}: {c} vs {bs}");
        }
    }

    #[test]
    fn small_vol_of_vol_near_black_scholes() {
        // With sigma_v = 0.01 the residual skew still moves the K=120 call by ~1.4e-3.
        let h = HestonParams {
            rho: -0.5,
            kappa: 50.0,
            sigma: 0.01,
            theta: 0.04,
            v0: 0.04,
            rate: 0.03,
        };
        for &(k, tol) in &[(80.0, 1e-3), (100.0, 1e-3), (120.0, 2e-3)] {
            let c = heston_cos_price(&h, 100.0, k, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
            let bs = bs_price(&BsParams::new(100.0, k, 0.03, 0.2, 1.0).unwrap(), OptionKind::Call);
            assert!((c - bs).abs() < tol, "K={k}: {c} vs {bs}");
        }
    }

    #[test]
    fn put_call_parity() {
        let h = HestonParams { rate: 0.05, ..sample() };
        let cos = CosSettings::default();
        let c = heston_cos_price(&h, 1.0, 1.2, 2.0, OptionKind::Call, &cos).unwrap();
        let p = heston_cos_price(&h, 1.0, 1.2, 2.0, OptionKind::Put, &cos).unwrap();
        assert!((c - p - (1.0 - 1.2 * (-0.1f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn cumulants_match_closed_form_mean() {
        // E[ln S_T/S_0] = rT − ½∫E[v_t]dt.
        let h = HestonParams { rate: 0.02, ..sample() };
        let t = 1.7;
        let int_v = h.theta * t + (h.v0 - h.theta) * (1.0 - (-h.kappa * t).exp()) / h.kappa;
        let (c1, c2, c4) = h.cumulants(t);
        assert!(c4 > 0.0);
        assert!((c1 - (h.rate * t - 0.5 * int_v)).abs() < 1e-7, "{c1}");
        assert!(c2 > 0.0);
    }

    #[test]
    fn small_vol_of_vol_is_stable() {
        let h = HestonParams {
            rho: -0.3,
            kappa: 1.0,
            sigma: 1e-7,
            theta: 0.04,
            v0: 0.04,
            rate: 0.0,
        };
        let c = heston_cos_price(&h, 1.0, 1.0, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
        let bs = bs_price(&BsParams::new(1.0, 1.0, 0.0, 0.2, 1.0).unwrap(), OptionKind::Call);
        assert!((c - bs).abs() < 1e-9, "{c} vs {bs}");
    }
}
