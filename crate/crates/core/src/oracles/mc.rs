//! Monte-Carlo engines used as independent truth for the closed forms.
//!
//! All engines use antithetic pairs and draw each block of pairs from its own
//! derived stream, so estimates depend only on `(seed, n_paths)`.

use rand_distr::{Distribution, StandardNormal};

use super::barrier::BarrierSpec;
use super::bs::{BsParams, OptionKind};
use super::heston::HestonParams;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

const PAIRS_PER_BLOCK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    /// Simulated paths, antithetic twins included.
    pub paths: usize,
}

impl McEstimate {
    /// `|x − price| ≤ k · std_error`.
    pub fn agrees_with(&self, x: f64, k: f64) -> bool {
        (x - self.price).abs() <= k * self.std_error
    }
}

/// Runs `pair` once per antithetic pair; `pair` returns the pair-averaged,
/// undiscounted payoff.
fn run_pairs(
    n_paths: usize,
    seed: u64,
    tag: &str,
    discount: f64,
    mut pair: impl FnMut(&mut StreamRng) -> f64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be >= 1"));
    }
    let n_pairs = n_paths.div_ceil(2);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut done = 0usize;
    let mut block = 0u64;
    while done < n_pairs {
        let m = PAIRS_PER_BLOCK.min(n_pairs - done);
        let mut rng = rng::substream(seed, tag, block);
        let (mut bs, mut bss) = (0.0, 0.0);
        for _ in 0..m {
            let y = pair(&mut rng);
            bs += y;
            bss += y * y;
        }
        sum += bs;
        sum_sq += bss;
        done += m;
        block += 1;
    }
    let n = n_pairs as f64;
    let mean = sum / n;
    let var = if n_pairs > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        price: discount * mean,
        std_error: discount * (var / n).sqrt(),
        paths: 2 * n_pairs,
    })
}

#[inline]
fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Vanilla European under Black-Scholes by exact terminal sampling.
pub fn mc_european(p: &BsParams, kind: OptionKind, n_paths: usize, seed: u64) -> Result<McEstimate> {
    p.validate()?;
    let drift = (p.rate - 0.5 * p.sigma * p.sigma) * p.tau;
    let vol = p.sigma * p.tau.sqrt();
    let payoff = move |s: f64| match kind {
        OptionKind::Call => (s - p.strike).max(0.0),
        OptionKind::Put => (p.strike - s).max(0.0),
    };
    run_pairs(n_paths, seed, "mc-european", (-p.rate * p.tau).exp(), |rng| {
        let z = normal(rng);
        let up = p.spot * (drift + vol * z).exp();
        let dn = p.spot * (drift - vol * z).exp();
        0.5 * (payoff(up) + payoff(dn))
    })
}

/// Two correlated lognormal assets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainbowSpec {
    pub spot1: f64,
    pub spot2: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub tau: f64,
}

impl RainbowSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.spot1, self.spot2, self.strike, self.rate, self.sigma1, self.sigma2, self.rho, self.tau]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || self.spot1 <= 0.0
            || self.spot2 <= 0.0
            || self.strike <= 0.0
            || self.sigma1 < 0.0
            || self.sigma2 < 0.0
            || self.tau < 0.0
            || self.rho.abs() > 1.0
        {
            return Err(Error::invalid(format!("invalid rainbow parameters {self:?}")));
        }
        Ok(())
    }
}

/// Put on the maximum of two assets, `max{K − max(S₁, S₂), 0}`.
pub fn mc_rainbow_put_max(spec: &RainbowSpec, n_paths: usize, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    let t = spec.tau;
    let m1 = (spec.rate - 0.5 * spec.sigma1 * spec.sigma1) * t;
    let m2 = (spec.rate - 0.5 * spec.sigma2 * spec.sigma2) * t;
    let v1 = spec.sigma1 * t.sqrt();
    let v2 = spec.sigma2 * t.sqrt();
    let rho_c = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
    let payoff = |z1: f64, z2: f64| {
        let s1 = spec.spot1 * (m1 + v1 * z1).exp();
        let s2 = spec.spot2 * (m2 + v2 * (spec.rho * z1 + rho_c * z2)).exp();
        (spec.strike - s1.max(s2)).max(0.0)
    };
    run_pairs(n_paths, seed, "mc-rainbow-put-max", (-spec.rate * t).exp(), |rng| {
        let z1 = normal(rng);
        let z2 = normal(rng);
        0.5 * (payoff(z1, z2) + payoff(-z1, -z2))
    })
}

/// Continuously monitored double knock-out call.
///
/// Paths are sampled exactly on an `n_steps` grid; the probability of an
/// unobserved crossing inside each step is removed analytically through the
/// Brownian-bridge exit probabilities of both barriers.
pub fn mc_double_barrier_call(spec: &BarrierSpec, n_paths: usize, n_steps: usize, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    let dt = spec.tau / n_steps as f64;
    let drift = (spec.rate - 0.5 * spec.sigma * spec.sigma) * dt;
    let vol = spec.sigma * dt.sqrt();
    let two_over_var = 2.0 / (spec.sigma * spec.sigma * dt);
    let (lo, hi) = (spec.lower.ln(), spec.upper.ln());
    let x0 = spec.spot.ln();
    if x0 <= lo || x0 >= hi {
        return Ok(McEstimate {
            price: 0.0,
            std_error: 0.0,
            paths: 0,
        });
    }
    let mut zs = vec![0.0; n_steps];
    let path = |zs: &[f64], sign: f64| -> f64 {
        let mut x = x0;
        let mut survive = 1.0;
        for &z in zs {
            let next = x + drift + sign * vol * z;
            if next <= lo || next >= hi {
                return 0.0;
            }
            let p_up = (-(hi - x) * (hi - next) * two_over_var).exp();
            let p_dn = (-(x - lo) * (next - lo) * two_over_var).exp();
            survive *= (1.0 - p_up) * (1.0 - p_dn);
            x = next;
        }
        survive * (x.exp() - spec.strike).max(0.0)
    };
    run_pairs(n_paths, seed, "mc-double-barrier", (-spec.rate * spec.tau).exp(), |rng| {
        for z in zs.iter_mut() {
            *z = normal(rng);
        }
        0.5 * (path(&zs, 1.0) + path(&zs, -1.0))
    })
}

/// Heston European by full-truncation Euler on the variance and log-Euler on
/// the price.
pub fn mc_heston(
    h: &HestonParams,
    spot: f64,
    strike: f64,
    tau: f64,
    kind: OptionKind,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    h.validate()?;
    if n_steps == 0 || !(tau > 0.0) {
        return Err(Error::invalid("need n_steps >= 1 and tau > 0"));
    }
    let dt = tau / n_steps as f64;
    let sdt = dt.sqrt();
    let rho_c = (1.0 - h.rho * h.rho).sqrt();
    let mut draws = vec![(0.0, 0.0); n_steps];
    let path = |draws: &[(f64, f64)], sign: f64| -> f64 {
        let mut x = spot.ln();
        let mut v = h.v0;
        for &(z1, w) in draws {
            let vp = v.max(0.0);
            let sv = vp.sqrt() * sdt;
            let z2 = h.rho * z1 + rho_c * w;
            x += (h.rate - 0.5 * vp) * dt + sv * sign * z1;
            v += h.kappa * (h.theta - vp) * dt + h.sigma * sv * sign * z2;
        }
        let s = x.exp();
        match kind {
            OptionKind::Call => (s - strike).max(0.0),
            OptionKind::Put => (strike - s).max(0.0),
        }
    };
    run_pairs(n_paths, seed, "mc-heston", (-h.rate * tau).exp(), |rng| {
        for d in draws.iter_mut() {
            *d = (normal(rng), normal(rng));
        }
        0.5 * (path(&draws, 1.0) + path(&draws, -1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs::bs_price;

    #[test]
    fn deterministic_given_seed() {
        let p = BsParams::new(15.0, 15.0, 0.04, 0.25, 1.0).unwrap();
        let a = mc_european(&p, OptionKind::Put, 20_000, 3).unwrap();
        let b = mc_european(&p, OptionKind::Put, 20_000, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.paths, 20_000);
    }

    #[test]
    fn european_matches_closed_form() {
        let p = BsParams::new(15.0, 15.0, 0.04, 0.25, 1.0).unwrap();
        let mc = mc_european(&p, OptionKind::Put, 1_000_000, 11).unwrap();
        let exact = bs_price(&p, OptionKind::Put);
        assert!(mc.agrees_with(exact, 3.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn rainbow_deep_out_of_the_money_is_zero() {
        let spec = RainbowSpec {
            spot1: 20.0,
            spot2: 20.0,
            strike: 0.01,
            rate: 0.04,
            sigma1: 0.25,
            sigma2: 0.25,
            rho: 0.0,
            tau: 1.0,
        };
        assert!(mc_rainbow_put_max(&spec, 100_000, 1).unwrap().price < 1e-12);
    }

    #[test]
    fn perfectly_correlated_rainbow_is_vanilla_put() {
        let spec = RainbowSpec {
            spot1: 18.0,
            spot2: 18.0,
            strike: 20.0,
            rate: 0.04,
            sigma1: 0.25,
            sigma2: 0.25,
            rho: 1.0,
            tau: 1.0,
        };
        let mc = mc_rainbow_put_max(&spec, 1_000_000, 5).unwrap();
        let exact = bs_price(&BsParams::new(18.0, 20.0, 0.04, 0.25, 1.0).unwrap(), OptionKind::Put);
        assert!(mc.agrees_with(exact, 3.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn rejects_zero_paths() {
        let p = BsParams::new(1.0, 1.0, 0.0, 0.2, 1.0).unwrap();
        assert!(mc_european(&p, OptionKind::Call, 0, 0).is_err());
    }
}
