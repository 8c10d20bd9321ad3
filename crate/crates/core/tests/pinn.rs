use std::sync::Arc;

use elmfin::pinn::presets::BsPut;
use elmfin::pinn::*;
use elmfin::{fit_ridge, rng, Activation, HiddenLayer, InputScaler};
use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn network(layer: &HiddenLayer, beta: &Array1<f64>, p: &[f64]) -> f64 {
    layer.hidden_row(ndarray::ArrayView1::from(p)).unwrap().dot(beta)
}

fn finite_difference(layer: &HiddenLayer, beta: &Array1<f64>, p: &[f64], spec: Deriv) -> f64 {
    let m = p.len() - 1;
    let f = |shifts: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(i, d) in shifts {
            q[i] += d;
        }
        network(layer, beta, &q)
    };
    let h1 = 1e-5;
    let h2 = 1e-4;
    match spec {
        Deriv::Value => f(&[]),
        Deriv::Dt => (f(&[(m, h1)]) - f(&[(m, -h1)])) / (2.0 * h1),
        Deriv::Dx(l) => (f(&[(l, h1)]) - f(&[(l, -h1)])) / (2.0 * h1),
        Deriv::Dxx(i, j) if i == j => (f(&[(i, h2)]) - 2.0 * f(&[]) + f(&[(i, -h2)])) / (h2 * h2),
        Deriv::Dxx(i, j) => {
            (f(&[(i, h2), (j, h2)]) - f(&[(i, h2), (j, -h2)]) - f(&[(i, -h2), (j, h2)]) + f(&[(i, -h2), (j, -h2)])) / (4.0 * h2 * h2)
        }
    }
}

#[test]
fn derivative_rows_match_finite_differences() {
    let mut r = rng::stream(3, "deriv-fd");
    let mut worst: f64 = 0.0;
    for inst in 0..100u64 {
        let m = r.random_range(1..=3);
        let act = if inst % 2 == 0 { Activation::Tanh } else { Activation::Sine };
        let layer = HiddenLayer::random(m + 1, 20, 1.0, act, inst).unwrap();
        let beta = Array1::from_shape_fn(20, |_| { let v: f64 = StandardNormal.sample(&mut r); v } / 20.0);
        let p: Vec<f64> = (0..=m).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut specs = vec![Deriv::Dt];
        for i in 0..m {
            specs.push(Deriv::Dx(i));
            for j in 0..m {
                specs.push(Deriv::Dxx(i, j));
            }
        }
        for spec in specs {
            let row = derivative_row(&layer, &p, spec).unwrap();
            let fd = finite_difference(&layer, &beta, &p, spec);
            worst = worst.max((row.dot(&beta) - fd).abs());
        }
    }
    assert!(worst <= 1e-6, "worst abs diff {worst:e}");
}

#[test]
fn zero_weights_give_zero_derivative_rows() {
    let layer = HiddenLayer::from_parts(Array2::zeros((4, 3)), array![0.1, -0.3, 0.7, 1.2], Activation::Tanh, 1.0, 0).unwrap();
    let p = [0.4, -0.2, 0.9];
    for spec in [Deriv::Dt, Deriv::Dx(0), Deriv::Dx(1), Deriv::Dxx(0, 0), Deriv::Dxx(0, 1)] {
        assert!(derivative_row(&layer, &p, spec).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn single_tanh_node_by_hand() {
    let (wx, wt, b) = (0.7, -1.3, 0.2);
    let layer = HiddenLayer::from_parts(array![[wx, wt]], array![b], Activation::Tanh, 1.0, 0).unwrap();
    let (x, t) = (0.5, 0.25);
    let z: f64 = wx * x + wt * t + b;
    let th = z.tanh();
    let g1 = 1.0 - th * th;
    let g2 = -2.0 * th * g1;
    let row = |s| derivative_row(&layer, &[x, t], s).unwrap()[0];
    assert!((row(Deriv::Value) - th).abs() < 1e-15);
    assert!((row(Deriv::Dt) - wt * g1).abs() < 1e-15);
    assert!((row(Deriv::Dx(0)) - wx * g1).abs() < 1e-15);
    assert!((row(Deriv::Dxx(0, 0)) - wx * wx * g2).abs() < 1e-15);
    assert!(derivative_row(&layer, &[x, t], Deriv::Dx(1)).is_err());
}

fn one_dim_problem(a: f64, b: f64, r: f64) -> PdeProblem {
    PdeProblem {
        name: "test".into(),
        diffusion: array![[a]],
        drift: array![b],
        discount: r,
        rhs: Arc::new(|_, _| 0.0),
        lo: vec![-1.0],
        hi: vec![1.0],
        horizon: 1.0,
        terminal: Arc::new(|_| 1.0),
        boundary: Arc::new(|_, _| 1.0),
    }
}

fn single_points(x: f64, t: f64) -> CollocationSet {
    CollocationSet {
        interior: array![[x, t]],
        boundary: array![[1.0, t]],
        terminal: array![[x, 1.0]],
        seed: 0,
    }
}

#[test]
fn heat_operator_row_by_hand() {
    let (sigma, r) = (0.3, 0.05);
    let prob = one_dim_problem(0.5 * sigma * sigma, r, r);
    let (wx, wt, b) = (0.8, 0.4, -0.1);
    let layer = HiddenLayer::from_parts(array![[wx, wt]], array![b], Activation::Tanh, 1.0, 0).unwrap();
    let (x, t) = (0.3, 0.6);
    let (h, y) = assemble(&prob, &layer, &prob.identity_map(), &single_points(x, t), Weighting::Uniform).unwrap();
    let z: f64 = wx * x + wt * t + b;
    let g = z.tanh();
    let g1 = 1.0 - g * g;
    let g2 = -2.0 * g * g1;
    let expect = wt * g1 + 0.5 * sigma * sigma * wx * wx * g2 + r * wx * g1 - r * g;
    assert!((h[[0, 0]] - expect).abs() < 1e-15);
    assert_eq!(y[0], 0.0);
    assert_eq!(y[1], 1.0);
    assert_eq!(y[2], 1.0);
}

#[test]
fn pure_time_operator_gives_time_derivative_rows() {
    let prob = one_dim_problem(0.0, 0.0, 0.0);
    let layer = HiddenLayer::random(2, 7, 1.0, Activation::Sine, 4).unwrap();
    let pts = single_points(-0.4, 0.2);
    let (h, _) = assemble(&prob, &layer, &prob.identity_map(), &pts, Weighting::Uniform).unwrap();
    let dt = derivative_row(&layer, &[-0.4, 0.2], Deriv::Dt).unwrap();
    assert!((&h.row(0) - &dt).iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn inverse_sqrt_weighting_scales_blocks() {
    let prob = one_dim_problem(0.1, 0.0, 0.0);
    let layer = HiddenLayer::random(2, 5, 1.0, Activation::Tanh, 2).unwrap();
    let pts = CollocationSet::sample(&prob, &CollocationCounts { interior: 9, boundary: 4, terminal: 16, near_expiry: 0.0 }, 1).unwrap();
    let map = prob.unit_box();
    let (hu, _) = assemble(&prob, &layer, &map, &pts, Weighting::Uniform).unwrap();
    let (hw, _) = assemble(&prob, &layer, &map, &pts, Weighting::InverseSqrtCount).unwrap();
    assert!((hw[[0, 0]] - hu[[0, 0]] / 3.0).abs() < 1e-15);
    assert!((hw[[9, 0]] - hu[[9, 0]] / 2.0).abs() < 1e-15);
    assert!((hw[[13, 0]] - hu[[13, 0]] / 4.0).abs() < 1e-15);
}

#[test]
fn chain_rule_for_rescaled_inputs() {
    // The same function expressed through the unit-box map must give the
    // same operator rows as an identity-map network with rescaled weights.
    let mut prob = one_dim_problem(0.2, 0.1, 0.03);
    prob.lo = vec![2.0];
    prob.hi = vec![6.0];
    prob.horizon = 2.0;
    let map = prob.unit_box();
    let layer = HiddenLayer::random(2, 6, 1.0, Activation::Tanh, 9).unwrap();
    // ξ = 2(p − lo)/(hi − lo) − 1 = a p + c
    let a = [2.0 / 4.0, 2.0 / 2.0];
    let c = [-2.0 * 2.0 / 4.0 - 1.0, -1.0];
    let w = Array2::from_shape_fn((6, 2), |(k, j)| layer.weights[[k, j]] * a[j]);
    let bias = Array1::from_shape_fn(6, |k| layer.biases[k] + layer.weights[[k, 0]] * c[0] + layer.weights[[k, 1]] * c[1]);
    let plain = HiddenLayer::from_parts(w, bias, Activation::Tanh, 1.0, 0).unwrap();
    let pts = CollocationSet { interior: array![[3.1, 0.7]], boundary: array![[2.0, 1.5]], terminal: array![[5.0, 2.0]], seed: 0 };
    let (h1, _) = assemble(&prob, &layer, &map, &pts, Weighting::Uniform).unwrap();
    let (h2, _) = assemble(&prob, &plain, &prob.identity_map(), &pts, Weighting::Uniform).unwrap();
    assert!((&h1 - &h2).iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn constant_solution_is_recovered() {
    let prob = one_dim_problem(0.0, 0.0, 0.0);
    let cfg = PinnConfig {
        nodes: 200,
        counts: CollocationCounts { interior: 1000, boundary: 300, terminal: 300, near_expiry: 0.25 },
        ..PinnConfig::default()
    };
    let sol = solve_pde(&prob, &cfg).unwrap();
    let grid = Array2::from_shape_fn((441, 2), |(i, j)| if j == 0 { -1.0 + 0.1 * (i / 21) as f64 } else { 0.05 * (i % 21) as f64 });
    let worst = sol.predict(grid.view()).unwrap().iter().map(|v| (v - 1.0).abs()).fold(0.0f64, f64::max);
    assert!(worst <= 1e-4, "{worst:e}");
}

fn small_put_config(nodes: usize) -> PinnConfig {
    PinnConfig {
        nodes,
        counts: CollocationCounts { interior: 2000, boundary: 600, terminal: 600, near_expiry: 0.25 },
        ..PinnConfig::default()
    }
}

#[test]
fn solution_satisfies_ridge_normal_equations() {
    let prob = BsPut::default().problem().unwrap();
    let cfg = small_put_config(400);
    let pts = CollocationSet::sample(&prob, &cfg.counts, cfg.collocation_seed).unwrap();
    let sol = solve_on(&prob, &cfg, &pts).unwrap();
    let (h, y) = assemble(&prob, &sol.model.layer, &sol.map, &pts, cfg.weighting).unwrap();
    let beta = &sol.model.beta;
    let hty = h.t().dot(&y);
    let lhs = h.t().dot(&h.dot(beta)) + cfg.ridge * beta;
    let rel = (&lhs - &hty).mapv(|v| v * v).sum().sqrt() / hty.mapv(|v| v * v).sum().sqrt();
    assert!(rel <= 1e-8, "{rel:e}");
}

#[test]
fn assembled_system_reproduces_solver_output() {
    let prob = BsPut::default().problem().unwrap();
    let cfg = small_put_config(600);
    let pts = CollocationSet::sample(&prob, &cfg.counts, cfg.collocation_seed).unwrap();
    let sol = solve_on(&prob, &cfg, &pts).unwrap();
    let (h, y) = assemble(&prob, &sol.model.layer, &sol.map, &pts, cfg.weighting).unwrap();
    let beta = fit_ridge(h.view(), y.view(), cfg.ridge).unwrap();
    let p = BsPut::default();
    let (_, line) = p.eval_line(50);
    let a = sol.predict(line.view()).unwrap();
    let hb = sol.model.layer.hidden_matrix(sol.map.transform(line.view()).unwrap().view()).unwrap().dot(&beta);
    let diff = (&a - &hb).iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    assert!(diff <= 1e-6, "{diff:e}");
}

#[test]
fn interior_residual_shrinks_with_more_nodes() {
    let p = BsPut::default();
    let prob = p.problem().unwrap();
    let counts = CollocationCounts::default();
    let pts = CollocationSet::sample(&prob, &counts, 2).unwrap();
    let small = solve_on(&prob, &PinnConfig { nodes: 500, ..PinnConfig::default() }, &pts).unwrap();
    let large = solve_on(&prob, &PinnConfig { nodes: 5000, ..PinnConfig::default() }, &pts).unwrap();
    assert!(large.residuals.interior <= small.residuals.interior, "{:?} vs {:?}", large.residuals, small.residuals);
}

#[test]
fn boundary_fit_generalizes_to_fresh_points() {
    let prob = BsPut::default().problem().unwrap();
    let cfg = small_put_config(800);
    let sol = solve_pde(&prob, &cfg).unwrap();
    let fresh = CollocationSet::sample(&prob, &cfg.counts, 99).unwrap();
    let rms = sol.boundary_rms(fresh.boundary.view()).unwrap();
    assert!(rms <= 10.0 * sol.residuals.boundary, "{rms:e} vs {:e}", sol.residuals.boundary);
}

#[test]
fn collocation_sampling_respects_regions() {
    let prob = elmfin::pinn::presets::RainbowMaxPut::default().problem().unwrap();
    let counts = CollocationCounts { interior: 400, boundary: 400, terminal: 100, near_expiry: 0.25 };
    let pts = CollocationSet::sample(&prob, &counts, 5).unwrap();
    let late = pts.interior.rows().into_iter().filter(|r| r[2] >= 0.9).count();
    assert!(late >= 100);
    for r in pts.boundary.rows() {
        let on_face = (0..2).any(|l| r[l] == prob.lo[l] || r[l] == prob.hi[l]);
        assert!(on_face);
    }
    assert!(pts.terminal.column(2).iter().all(|&t| t == 1.0));
    assert_eq!(pts, CollocationSet::sample(&prob, &counts, 5).unwrap());
}

#[test]
fn empty_block_is_rejected() {
    let prob = one_dim_problem(0.1, 0.0, 0.0);
    let layer = HiddenLayer::random(2, 3, 1.0, Activation::Tanh, 1).unwrap();
    let pts = CollocationSet { interior: Array2::zeros((0, 2)), boundary: array![[1.0, 0.0]], terminal: array![[0.0, 1.0]], seed: 0 };
    assert!(assemble(&prob, &layer, &InputScaler::from_bounds(vec![-1.0; 2], vec![1.0; 2]).unwrap(), &pts, Weighting::Uniform).is_err());
}
