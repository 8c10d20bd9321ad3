use elmfin::classify::*;
use elmfin::{rng, ElmModel, HiddenLayer, Activation};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn blobs(n: usize, gap: f64, noise: f64, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut r = rng::stream(seed, "blobs");
    let mut x = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let lab = if i % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..2 {
            let z: f64 = StandardNormal.sample(&mut r);
            x[[i, j]] = lab * gap + noise * z;
        }
        y[i] = lab;
    }
    (x, y)
}

fn labels(y: &Array1<f64>) -> Vec<i8> {
    y.iter().map(|&v| v as i8).collect()
}

#[test]
fn separable_blobs_are_learned_by_both_models() {
    let (x, y) = blobs(1000, 2.0, 0.4, 1);
    let lr = train_logistic(x.view(), y.view(), &LogisticConfig::default()).unwrap();
    let elm = train_elm_classifier(x.view(), y.view(), &ElmClassifierConfig::default()).unwrap();
    let yt = labels(&y);
    assert!(scores(&yt, &lr.predict_labels(x.view()).unwrap()).unwrap().accuracy >= 99.0);
    assert!(scores(&yt, &predict_labels(&elm, x.view()).unwrap()).unwrap().accuracy >= 99.0);
}

#[test]
fn single_label_data_predicts_that_label() {
    let (x, _) = blobs(200, 1.0, 1.0, 2);
    let y = Array1::from_elem(200, -1.0);
    let lr = train_logistic(x.view(), y.view(), &LogisticConfig::default()).unwrap();
    assert!(lr.predict_labels(x.view()).unwrap().iter().all(|&l| l == -1));
}

#[test]
fn logistic_gradient_vanishes_at_convergence() {
    let (x, y) = blobs(500, 0.3, 1.0, 3);
    let cfg = LogisticConfig { iterations: 5000, ..LogisticConfig::default() };
    let m = train_logistic(x.view(), y.view(), &cfg).unwrap();
    let g = m.gradient(x.view(), y.view(), cfg.l2);
    let norm = g.dot(&g).sqrt();
    assert!(norm <= 1e-4, "{norm:e}");
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let (x, y) = blobs(50, 0.5, 1.0, 4);
    let m = LogisticModel { weights: vec![0.3, -0.2], intercept: 0.1 };
    let loss = |m: &LogisticModel| {
        let z = m.decision(x.view()).unwrap();
        z.iter().zip(y.iter()).map(|(&z, &y)| (1.0 + (-y * z).exp()).ln()).sum::<f64>() / 50.0
            + 0.5 * 1e-3 * m.weights.iter().map(|w| w * w).sum::<f64>()
    };
    let g = m.gradient(x.view(), y.view(), 1e-3);
    let h = 1e-6;
    for i in 0..3 {
        let mut up = m.clone();
        let mut dn = m.clone();
        if i < 2 {
            up.weights[i] += h;
            dn.weights[i] -= h;
        } else {
            up.intercept += h;
            dn.intercept -= h;
        }
        assert!(((loss(&up) - loss(&dn)) / (2.0 * h) - g[i]).abs() < 1e-8);
    }
}

#[test]
fn more_nodes_fit_training_data_at_least_as_well() {
    let (x, y) = blobs(600, 0.3, 1.0, 5);
    let yt = labels(&y);
    let acc = |nodes| {
        let cfg = ElmClassifierConfig { nodes, scale: 1.0, ..ElmClassifierConfig::default() };
        let m = train_elm_classifier(x.view(), y.view(), &cfg).unwrap();
        scores(&yt, &predict_labels(&m, x.view()).unwrap()).unwrap().accuracy
    };
    assert!(acc(300) >= acc(30));
}

#[test]
fn zero_output_weights_predict_positive() {
    let layer = HiddenLayer::random(2, 5, 1.0, Activation::Sine, 1).unwrap();
    let m = ElmModel::new(layer, Array1::zeros(5), 0.0).unwrap();
    let (x, _) = blobs(20, 1.0, 1.0, 6);
    assert!(predict_labels(&m, x.view()).unwrap().iter().all(|&l| l == 1));
}

#[test]
fn scores_match_confusion_counts() {
    let mut r = rng::stream(7, "scores");
    let t: Vec<i8> = (0..500).map(|_| if r.random_bool(0.4) { 1 } else { -1 }).collect();
    let p: Vec<i8> = (0..500).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
    let mut c = [[0usize; 2]; 2];
    for (a, b) in t.iter().zip(&p) {
        c[(*a == 1) as usize][(*b == 1) as usize] += 1;
    }
    let (tp, fp, fneg) = (c[1][1] as f64, c[0][1] as f64, c[1][0] as f64);
    let s = scores(&t, &p).unwrap();
    assert!((s.accuracy - 100.0 * (c[1][1] + c[0][0]) as f64 / 500.0).abs() < 1e-12);
    assert!((s.f1 - 100.0 * 2.0 * tp / (2.0 * tp + fp + fneg)).abs() < 1e-10);
}

#[test]
fn labels_match_brute_force() {
    let mut r = rng::stream(8, "labels");
    let prices: Vec<f64> = (0..300).map(|_| (r.random_range(0..5) as f64) * 0.01 + 10.0).collect();
    let got = label_series(&prices, 3);
    assert_eq!(got.len(), 297);
    for i in 0..297 {
        let want = if prices[i + 3] >= prices[i] { 1 } else { -1 };
        assert_eq!(got[i], want);
    }
}

#[test]
fn generated_rows_respect_invariants() {
    let mc = MarketConfig { days: 3, ..MarketConfig::default() };
    let days = generate_market(&mc, 11).unwrap();
    for d in &days {
        assert!(d.trades.windows(2).all(|w| w[0].ts <= w[1].ts));
        assert!(d.trades.iter().all(|t| t.volume > 0.0));
        assert!(d.snapshots.iter().all(|s| s.bids[0].0 < s.asks[0].0));
        assert!(d.snapshots.iter().all(|s| s.bids.windows(2).all(|w| w[0].0 > w[1].0) && s.asks.windows(2).all(|w| w[0].0 < w[1].0)));
    }
    let full = FeatureConfig { mask: [true; 13], ..FeatureConfig::default() };
    let rows = build_rows(&days, mc.session_secs, &full).unwrap();
    assert!(rows.dropped > 0);
    for r in rows.x.rows() {
        let (open, close, high, low) = (r[0], r[1], r[2], r[3]);
        assert!(high >= open.max(close) && open.min(close) >= low);
        assert!(r.iter().skip(7).all(|v| (-1.0..=1.0).contains(v)));
    }
    let default = build_rows(&days, mc.session_secs, &FeatureConfig::default()).unwrap();
    assert_eq!(default.x.ncols(), 12);
    assert_eq!(FeatureConfig::default().names().len(), 12);
}

#[test]
fn rolling_protocol_on_synthetic_market() {
    let mc = MarketConfig::default();
    let days = generate_market(&mc, 7).unwrap();
    let rows = build_rows(&days, mc.session_secs, &FeatureConfig::default()).unwrap();
    let res = rolling_protocol(&rows, &RollingConfig::default()).unwrap();
    assert_eq!(res.len(), 2 * 10);
    for model in [ModelKind::Elm, ModelKind::Lr] {
        let acc: Vec<f64> = res.iter().filter(|r| r.model == model).map(|r| r.scores.accuracy).collect();
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        let sd = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64).sqrt();
        assert!(sd <= 5.0, "{model:?}: {sd}");
    }
    let ms = |m| res.iter().filter(|r| r.model == m).map(|r| r.train_ms).sum::<f64>();
    assert!(ms(ModelKind::Elm) < ms(ModelKind::Lr));
    let again = rolling_protocol(&rows, &RollingConfig::default()).unwrap();
    assert_eq!(daily_metrics_csv(&res).unwrap(), daily_metrics_csv(&again).unwrap());
}

#[test]
fn one_test_day_equals_direct_split() {
    let mc = MarketConfig { days: 2, ..MarketConfig::default() };
    let days = generate_market(&mc, 12).unwrap();
    let rows = build_rows(&days, mc.session_secs, &FeatureConfig::default()).unwrap();
    let cfg = RollingConfig { initial_days: 1, ..RollingConfig::default() };
    let res = rolling_protocol(&rows, &cfg).unwrap();
    let train = rows.select(&rows.rows_of(|d| d == 0));
    let test = rows.select(&rows.rows_of(|d| d == 1));
    let direct = evaluate_split(&train, &test, 1, &cfg).unwrap();
    for (a, b) in res.iter().zip(direct.iter()) {
        assert_eq!(a.scores, b.scores);
    }
}

#[test]
fn rolling_needs_a_test_day() {
    let mc = MarketConfig { days: 2, ..MarketConfig::default() };
    let days = generate_market(&mc, 13).unwrap();
    let rows = build_rows(&days, mc.session_secs, &FeatureConfig::default()).unwrap();
    assert!(rolling_protocol(&rows, &RollingConfig { initial_days: 2, ..RollingConfig::default() }).is_err());
}
