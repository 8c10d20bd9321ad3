use elmfin::oracles::*;
use elmfin::rng;
use rand::Rng;

fn bisect_iv(price: f64, spot: f64, strike: f64, rate: f64, tau: f64, kind: OptionKind) -> f64 {
    let f = |s: f64| bs_price(&BsParams { spot, strike, rate, sigma: s, tau }, kind) - price;
    let (mut lo, mut hi) = (1e-4, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn bs_put_matches_monte_carlo() {
    let p = BsParams { spot: 15.0, strike: 15.0, rate: 0.04, sigma: 0.25, tau: 1.0 };
    let mc = mc_european(&p, OptionKind::Put, 1_000_000, 1).unwrap();
    assert!(mc.agrees_with(bs_price(&p, OptionKind::Put), 3.0), "{mc:?}");
}

#[test]
fn bs_matches_monte_carlo_on_random_draws() {
    let mut r = rng::stream(2, "bs-draws");
    for i in 0..20 {
        let p = BsParams {
            spot: r.random_range(5.0..30.0),
            strike: r.random_range(5.0..30.0),
            rate: r.random_range(0.0..0.08),
            sigma: r.random_range(0.05..0.8),
            tau: r.random_range(0.1..3.0),
        };
        let kind = if i % 2 == 0 { OptionKind::Call } else { OptionKind::Put };
        let mc = mc_european(&p, kind, 200_000, 100 + i).unwrap();
        let exact = bs_price(&p, kind);
        assert!((exact - mc.price).abs() <= 3.0 * mc.std_error + 1e-12, "{p:?} {mc:?}");
    }
}

#[test]
fn barrier_series_matches_bridge_monte_carlo() {
    let b = BarrierSpec { spot: 20.0, lower: 10.0, upper: 30.0, strike: 20.0, rate: 0.04, sigma: 0.15, tau: 1.0 };
    let series = double_barrier_call(&b, 10).unwrap();
    assert!(series.converged);
    let mc = mc_double_barrier_call(&b, 1_000_000, 50, 3).unwrap();
    assert!(mc.agrees_with(series.price, 3.0), "{} vs {mc:?}", series.price);
}

#[test]
fn barrier_series_matches_monte_carlo_with_wide_vol() {
    let b = BarrierSpec { spot: 18.0, lower: 12.0, upper: 28.0, strike: 19.0, rate: 0.03, sigma: 0.3, tau: 0.5 };
    let series = double_barrier_call(&b, 20).unwrap();
    let mc = mc_double_barrier_call(&b, 400_000, 50, 4).unwrap();
    assert!(mc.agrees_with(series.price, 3.0), "{} vs {mc:?}", series.price);
}

#[test]
fn barrier_vanishing_corridor_limit() {
    let k = 20.0;
    let b = BarrierSpec { spot: 20.0, lower: 0.01 * k, upper: 100.0 * k, strike: k, rate: 0.04, sigma: 0.15, tau: 1.0 };
    let bs = bs_price(&BsParams { spot: 20.0, strike: k, rate: 0.04, sigma: 0.15, tau: 1.0 }, OptionKind::Call);
    let v = double_barrier_call(&b, 10).unwrap().price;
    assert!(((v - bs) / bs).abs() <= 1e-6, "{v} vs {bs}");
}

#[test]
fn barrier_bounds_and_monotonicity_on_random_draws() {
    let mut r = rng::stream(5, "barrier-draws");
    for _ in 0..200 {
        let strike = r.random_range(10.0..30.0);
        let lower = strike * r.random_range(0.3..0.95);
        let upper = strike * r.random_range(1.05..3.0);
        let spot = r.random_range(lower..upper);
        let b = BarrierSpec {
            spot,
            lower,
            upper,
            strike,
            rate: r.random_range(-0.02..0.08),
            sigma: r.random_range(0.05..0.6),
            tau: r.random_range(0.05..3.0),
        };
        let v = double_barrier_call(&b, 30).unwrap().price;
        let call = bs_price(&BsParams { spot, strike, rate: b.rate, sigma: b.sigma, tau: b.tau }, OptionKind::Call);
        assert!(v >= -1e-12 && v <= call + 1e-10, "{b:?}: {v} vs {call}");
        let tighter_f = BarrierSpec { upper: 0.5 * (b.upper + spot.max(strike)), ..b };
        let tighter_e = BarrierSpec { lower: 0.5 * (b.lower + spot.min(strike)), ..b };
        for t in [tighter_f, tighter_e] {
            let w = double_barrier_call(&t, 30).unwrap().price;
            assert!(w <= v + 1e-10, "{t:?}: {w} > {v}");
        }
    }
}

#[test]
fn heston_cos_matches_monte_carlo() {
    let h = HestonParams { rho: -0.6, kappa: 1.5, sigma: 0.3, theta: 0.05, v0: 0.06, rate: 0.0 };
    let cos = heston_cos_price(&h, 1.0, 1.05, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
    let mc = mc_heston(&h, 1.0, 1.05, 1.0, OptionKind::Call, 1_000_000, 200, 6).unwrap();
    assert!(mc.agrees_with(cos, 3.0), "{cos} vs {mc:?}");
}

#[test]
fn heston_cos_matches_monte_carlo_on_random_draws() {
    let ranges = HestonRanges::default();
    let mut r = rng::stream(7, "heston-draws");
    for i in 0..20 {
        let h = HestonParams {
            rho: r.random_range(-0.95..-0.05),
            kappa: r.random_range(0.5..4.0),
            sigma: r.random_range(0.05..0.5),
            theta: r.random_range(0.01..0.1),
            v0: r.random_range(0.01..0.5),
            rate: 0.0,
        };
        let k = r.random_range(ranges.moneyness.0..ranges.moneyness.1);
        let t = r.random_range(0.25..2.0);
        let kind = if k > 1.0 { OptionKind::Call } else { OptionKind::Put };
        let cos = heston_cos_price(&h, 1.0, k, t, kind, &CosSettings::default()).unwrap();
        let mc = mc_heston(&h, 1.0, k, t, kind, 100_000, 200, 200 + i).unwrap();
        assert!(mc.agrees_with(cos, 3.0), "{h:?} k={k} T={t}: {cos} vs {mc:?}");
    }
}

#[test]
fn heston_cos_converges_in_terms() {
    let mut r = rng::stream(8, "cos-conv");
    for _ in 0..20 {
        let h = HestonParams {
            rho: r.random_range(-0.95..-0.05),
            kappa: r.random_range(0.2..4.0),
            sigma: r.random_range(0.05..0.5),
            theta: r.random_range(0.005..0.1),
            v0: r.random_range(0.005..0.5),
            rate: 0.0,
        };
        let k = r.random_range(0.714..1.667);
        let t = r.random_range(0.1..3.0);
        let base = CosSettings::default();
        let a = heston_cos_price(&h, 1.0, k, t, OptionKind::Put, &base).unwrap();
        let b = heston_cos_price(&h, 1.0, k, t, OptionKind::Put, &CosSettings { n_terms: 2 * base.n_terms, ..base }).unwrap();
        assert!((a - b).abs() <= 1e-6, "{h:?}: {a} vs {b}");
    }
}

#[test]
fn heston_fast_mean_reversion_limit() {
    let h = HestonParams { rho: -0.5, kappa: 50.0, sigma: 0.01, theta: 0.04, v0: 0.04, rate: 0.0 };
    for k in [80.0, 100.0] {
        let cos = heston_cos_price(&h, 100.0, k, 1.0, OptionKind::Call, &CosSettings::default()).unwrap();
        let bs = bs_price(&BsParams { spot: 100.0, strike: k, rate: 0.0, sigma: 0.2, tau: 1.0 }, OptionKind::Call);
        assert!((cos - bs).abs() <= 1e-3, "K={k}: {cos} vs {bs}");
    }
}

#[test]
fn implied_vol_round_trip_over_range() {
    let mut r = rng::stream(9, "iv-rt");
    for _ in 0..200 {
        let sigma = r.random_range(0.01..3.0);
        let spot = 1.0;
        let strike = r.random_range(0.8..1.25);
        let tau = r.random_range(0.1..2.0);
        let kind = if strike > spot { OptionKind::Call } else { OptionKind::Put };
        let price = bs_price(&BsParams { spot, strike, rate: 0.0, sigma, tau }, kind);
        let v = bs_vega(&BsParams { spot, strike, rate: 0.0, sigma, tau });
        if v < 1e-3 {
            continue;
        }
        let iv = implied_vol(price, spot, strike, 0.0, tau, kind).unwrap();
        assert!((iv - sigma).abs() <= 1e-8, "{sigma} -> {iv}");
    }
}

#[test]
fn implied_vol_agrees_with_plain_bisection_on_heston_prices() {
    let mut r = rng::stream(10, "iv-heston");
    for _ in 0..30 {
        let h = HestonParams {
            rho: r.random_range(-0.9..-0.1),
            kappa: r.random_range(0.5..4.0),
            sigma: r.random_range(0.05..0.5),
            theta: r.random_range(0.02..0.1),
            v0: r.random_range(0.02..0.5),
            rate: 0.0,
        };
        let k = r.random_range(0.8..1.25);
        let t = r.random_range(0.25..2.0);
        let kind = if k > 1.0 { OptionKind::Call } else { OptionKind::Put };
        let price = heston_cos_price(&h, 1.0, k, t, kind, &CosSettings::default()).unwrap();
        let a = implied_vol(price, 1.0, k, 0.0, t, kind).unwrap();
        let b = bisect_iv(price, 1.0, k, 0.0, t, kind);
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn implied_vol_rejects_price_below_bound() {
    let (lo, _) = bs::no_arbitrage_bounds(1.0, 1.1, 0.0, 1.0, OptionKind::Put);
    assert!(implied_vol(lo - 1e-6, 1.0, 1.1, 0.0, 1.0, OptionKind::Put).is_err());
}

#[test]
fn rainbow_degenerates_to_vanilla_put() {
    let spec = RainbowSpec { spot1: 20.0, spot2: 20.0, strike: 20.0, rate: 0.04, sigma1: 0.25, sigma2: 0.25, rho: 1.0, tau: 1.0 };
    let mc = mc_rainbow_put_max(&spec, 1_000_000, 11).unwrap();
    let bs = bs_price(&BsParams { spot: 20.0, strike: 20.0, rate: 0.04, sigma: 0.25, tau: 1.0 }, OptionKind::Put);
    assert!(mc.agrees_with(bs, 3.0), "{bs} vs {mc:?}");
}

#[test]
fn rainbow_quadrature_matches_monte_carlo() {
    for rho in [0.0, -0.95, 0.5] {
        let spec = RainbowSpec { spot1: 18.0, spot2: 22.0, strike: 20.0, rate: 0.04, sigma1: 0.25, sigma2: 0.25, rho, tau: 1.0 };
        let q = rainbow_put_max(&spec).unwrap();
        let mc = mc_rainbow_put_max(&spec, 1_000_000, 12).unwrap();
        assert!(mc.agrees_with(q, 3.0), "rho={rho}: {q} vs {mc:?}");
    }
}

#[test]
fn heston_dataset_statistics() {
    let (ds, meta) = generate_heston_dataset(15_000, 13, &HestonDatasetConfig::default()).unwrap();
    assert_eq!(ds.len(), 15_000);
    let n = ds.len() as f64;
    let mean = ds.targets.sum() / n;
    let sd = (ds.targets.mapv(|v| (v - mean).powi(2)).sum() / (n - 1.0)).sqrt();
    assert!((0.2..=0.35).contains(&mean), "{mean}");
    assert!((0.1..=0.25).contains(&sd), "{sd}");
    assert_eq!(meta.seed, 13);
}
