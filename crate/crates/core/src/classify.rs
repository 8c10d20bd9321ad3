//! Intraday direction classification from trade and order-book features.
//!
//! A seeded synthetic market (log random walk whose drift follows a latent
//! order-flow imbalance mirrored in book depth) feeds the feature extractor,
//! an ELM classifier and a logistic-regression baseline, evaluated under
//! daily recalibration.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::elm::{ElmModel, HiddenLayer};
use crate::error::{ensure_dim, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    /// Seconds.
    pub ts: f64,
    pub price: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobSnapshot {
    pub ts: f64,
    /// `(price, volume)`, best first.
    pub bids: Vec<(f64, f64)>,
    pub asks: Vec<(f64, f64)>,
}

impl LobSnapshot {
    /// `(Q_bid − Q_ask)/(Q_bid + Q_ask)` over the top `depth` levels
    /// (all levels for `None`); 0 for an empty book.
    pub fn imbalance(&self, depth: Option<usize>) -> f64 {
        let k = depth.unwrap_or(usize::MAX);
        let qb: f64 = self.bids.iter().take(k).map(|l| l.1).sum();
        let qa: f64 = self.asks.iter().take(k).map(|l| l.1).sum();
        if qb + qa > 0.0 {
            (qb - qa) / (qb + qa)
        } else {
            0.0
        }
    }
}

pub const FEATURE_NAMES: [&str; 13] = [
    "open", "close", "high", "low", "vwap", "twap", "volume", "oi_1", "oi_5", "oi_all", "twa_oi_1", "twa_oi_5", "twa_oi_all",
];

/// Default mask: all features but `twap`, which duplicates the price level
/// already carried by `vwap` and the OHLC block.
pub const DEFAULT_MASK: [bool; 13] = [true, true, true, true, true, false, true, true, true, true, true, true, true];

const OI_DEPTHS: [Option<usize>; 3] = [Some(1), Some(5), None];

/// Price of the most recent trade at or before `t`.
pub fn price_at(trades: &[Trade], t: f64) -> Option<f64> {
    let i = trades.partition_point(|x| x.ts <= t);
    (i > 0).then(|| trades[i - 1].price)
}

fn snapshot_at(snaps: &[LobSnapshot], t: f64) -> Option<&LobSnapshot> {
    let i = snaps.partition_point(|x| x.ts <= t);
    (i > 0).then(|| &snaps[i - 1])
}

/// Time average over `[t0, t1)` of a piecewise-constant process whose value
/// changes at `events` (sorted by time); `initial` holds before the first event.
fn time_average(initial: f64, events: impl Iterator<Item = (f64, f64)>, t0: f64, t1: f64) -> f64 {
    let mut acc = 0.0;
    let mut last_t = t0;
    let mut last_v = initial;
    for (t, v) in events {
        acc += last_v * (t - last_t);
        last_t = t;
        last_v = v;
    }
    acc += last_v * (t1 - last_t);
    acc / (t1 - t0)
}

/// The 13 candidate features over `[t0, t1)`; book features use the state at `t1`
/// and time averages over the same window. `trades` and `snaps` must be sorted.
pub fn compute_features(trades: &[Trade], snaps: &[LobSnapshot], t0: f64, t1: f64) -> Result<[f64; 13]> {
    if !(t1 > t0) {
        return Err(Error::invalid(format!("empty interval [{t0}, {t1})")));
    }
    let open = price_at(trades, t0).ok_or_else(|| Error::invalid(format!("no trade at or before interval start {t0}")))?;
    let lo = trades.partition_point(|x| x.ts <= t0);
    let hi = trades.partition_point(|x| x.ts < t1);
    let inside = &trades[lo..hi];
    let close = inside.last().map_or(open, |x| x.price);
    let high = inside.iter().fold(open, |m, x| m.max(x.price));
    let low = inside.iter().fold(open, |m, x| m.min(x.price));
    let volume: f64 = inside.iter().map(|x| x.volume).sum();
    let vwap = if volume > 0.0 {
        inside.iter().map(|x| x.price * x.volume).sum::<f64>() / volume
    } else {
        close
    };
    let twap = time_average(open, inside.iter().map(|x| (x.ts, x.price)), t0, t1);

    let start = snapshot_at(snaps, t0).ok_or_else(|| Error::invalid(format!("no book snapshot at or before {t0}")))?;
    let s_lo = snaps.partition_point(|x| x.ts <= t0);
    let s_hi = snaps.partition_point(|x| x.ts < t1);
    let window = &snaps[s_lo..s_hi];
    let now = snapshot_at(snaps, t1).unwrap_or(start);
    let mut f = [open, close, high, low, vwap, twap, volume, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (j, depth) in OI_DEPTHS.iter().enumerate() {
        f[7 + j] = now.imbalance(*depth);
        f[10 + j] = time_average(start.imbalance(*depth), window.iter().map(|s| (s.ts, s.imbalance(*depth))), t0, t1);
    }
    Ok(f)
}

/// `+1` iff the later price is at least the earlier one.
pub fn label(now: f64, later: f64) -> i8 {
    if later >= now {
        1
    } else {
        -1
    }
}

/// Labels `+1/−1` comparing `prices[i + horizon]` with `prices[i]`; the last
/// `horizon` points have no label and are dropped.
pub fn label_series(prices: &[f64], horizon: usize) -> Vec<i8> {
    if prices.len() <= horizon {
        return Vec::new();
    }
    (0..prices.len() - horizon).map(|i| label(prices[i], prices[i + horizon])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub days: usize,
    pub session_secs: f64,
    pub snapshot_secs: f64,
    /// Trades per second.
    pub trade_rate: f64,
    pub levels: usize,
    pub tick: f64,
    pub start_price: f64,
    /// Diffusive log-price volatility per √second.
    pub vol: f64,
    /// Log-price drift per second per unit imbalance.
    pub signal: f64,
    /// Mean-reversion time of the latent imbalance, seconds.
    pub imbalance_halflife: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            days: 40,
            session_secs: 23_400.0,
            snapshot_secs: 3.0,
            trade_rate: 0.5,
            levels: 10,
            tick: 0.001,
            start_price: 10.0,
            vol: 1e-4,
            signal: 3e-5,
            imbalance_halflife: 1800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayStream {
    pub day: usize,
    /// Session opens at `day · 86400` seconds.
    pub open_ts: f64,
    pub trades: Vec<Trade>,
    pub snapshots: Vec<LobSnapshot>,
}

/// One stream per day; each day opens with a trade and a snapshot at the bell.
pub fn generate_market(cfg: &MarketConfig, seed: u64) -> Result<Vec<DayStream>> {
    if cfg.days == 0 || !(cfg.session_secs > 0.0) || !(cfg.snapshot_secs > 0.0) || !(cfg.trade_rate > 0.0) || cfg.levels == 0 || !(cfg.tick > 0.0) {
        return Err(Error::invalid(format!("invalid market config {cfg:?}")));
    }
    let mut r = rng::stream(seed, "market");
    let gaps = Exp::new(cfg.trade_rate).map_err(|e| Error::invalid(e.to_string()))?;
    let theta = std::f64::consts::LN_2 / cfg.imbalance_halflife;
    let mut log_mid = cfg.start_price.ln();
    let mut latent = 0.0f64;
    let round = |p: f64| (p / cfg.tick).round() * cfg.tick;
    let mut out = Vec::with_capacity(cfg.days);
    for day in 0..cfg.days {
        let open_ts = day as f64 * 86_400.0;
        let mut trades = Vec::new();
        let mut snapshots = Vec::new();
        let mut next_trade = 0.0;
        let mut next_snap = 0.0;
        let steps = cfg.session_secs.ceil() as usize;
        for sec in 0..steps {
            let t = sec as f64;
            let imb = latent.tanh();
            while next_snap <= t {
                let mut bids = Vec::with_capacity(cfg.levels);
                let mut asks = Vec::with_capacity(cfg.levels);
                let mid = log_mid.exp();
                for lvl in 0..cfg.levels {
                    let off = cfg.tick * (lvl as f64 + 1.0);
                    let base = 100.0 * (1.0 + 0.1 * lvl as f64);
                    let qb = base * (1.0 + imb) * r.random_range(0.5..1.5) + 1.0;
                    let qa = base * (1.0 - imb) * r.random_range(0.5..1.5) + 1.0;
                    bids.push((round(mid) - off + cfg.tick, qb.round()));
                    asks.push((round(mid) + off, qa.round()));
                }
                snapshots.push(LobSnapshot { ts: open_ts + next_snap, bids, asks });
                next_snap += cfg.snapshot_secs;
            }
            if sec == 0 {
                trades.push(Trade {
                    ts: open_ts,
                    price: round(log_mid.exp()),
                    volume: 100.0,
                });
                next_trade = gaps.sample(&mut r);
            }
            while next_trade < t + 1.0 {
                let side: f64 = if r.random_bool(0.5 + 0.25 * imb) { 1.0 } else { -1.0 };
                let price = round(log_mid.exp() * (1.0 + side * 0.5 * cfg.tick / cfg.start_price));
                trades.push(Trade {
                    ts: open_ts + next_trade,
                    price,
                    volume: (1.0 + 100.0 * r.random::<f64>()).round(),
                });
                next_trade += gaps.sample(&mut r);
            }
            let z: f64 = StandardNormal.sample(&mut r);
            log_mid += cfg.signal * imb + cfg.vol * z;
            let zl: f64 = StandardNormal.sample(&mut r);
            latent += -theta * latent + (2.0 * theta).sqrt() * zl;
        }
        out.push(DayStream {
            day,
            open_ts,
            trades,
            snapshots,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Window length `Δ` for features and the label horizon, seconds.
    pub window_secs: f64,
    /// Spacing of consecutive rows, seconds.
    pub step_secs: f64,
    pub mask: [bool; 13],
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_secs: 300.0,
            step_secs: 60.0,
            mask: DEFAULT_MASK,
        }
    }
}

impl FeatureConfig {
    pub fn names(&self) -> Vec<&'static str> {
        FEATURE_NAMES.iter().zip(self.mask).filter(|(_, m)| *m).map(|(n, _)| *n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRows {
    pub day: Vec<usize>,
    /// Start of each row's feature window.
    pub feature_start: Vec<f64>,
    /// Time at which each label becomes known, `t + Δ`.
    pub label_time: Vec<f64>,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    /// Rows dropped because the label horizon passed the session close.
    pub dropped: usize,
}

impl LabeledRows {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            day: idx.iter().map(|&i| self.day[i]).collect(),
            feature_start: idx.iter().map(|&i| self.feature_start[i]).collect(),
            label_time: idx.iter().map(|&i| self.label_time[i]).collect(),
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            dropped: 0,
        }
    }

    pub fn days(&self) -> Vec<usize> {
        let mut d = self.day.clone();
        d.dedup();
        d
    }

    pub fn rows_of(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(self.day[i])).collect()
    }
}

/// Rows at `t = open + Δ, open + Δ + step, …` with features over `[t − Δ, t)`
/// and labels from `P(t)` and `P(t + Δ)`.
pub fn build_rows(days: &[DayStream], session_secs: f64, cfg: &FeatureConfig) -> Result<LabeledRows> {
    if !(cfg.window_secs > 0.0 && cfg.step_secs > 0.0) {
        return Err(Error::invalid("window and step must be positive"));
    }
    let width = cfg.mask.iter().filter(|m| **m).count();
    if width == 0 {
        return Err(Error::invalid("feature mask selects nothing"));
    }
    let mut data = Vec::new();
    let (mut day, mut start, mut ltime, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    for d in days {
        let close = d.open_ts + session_secs;
        let mut t = d.open_ts + cfg.window_secs;
        while t <= close {
            if t + cfg.window_secs > close {
                dropped += 1;
                t += cfg.step_secs;
                continue;
            }
            let f = compute_features(&d.trades, &d.snapshots, t - cfg.window_secs, t)?;
            let now = price_at(&d.trades, t).expect("opening trade precedes t");
            let later = price_at(&d.trades, t + cfg.window_secs).expect("opening trade precedes t");
            data.extend(f.iter().zip(cfg.mask).filter(|(_, m)| *m).map(|(v, _)| *v));
            day.push(d.day);
            start.push(t - cfg.window_secs);
            ltime.push(t + cfg.window_secs);
            y.push(label(now, later) as f64);
            t += cfg.step_secs;
        }
    }
    let n = y.len();
    Ok(LabeledRows {
        day,
        feature_start: start,
        label_time: ltime,
        x: Array2::from_shape_vec((n, width), data).map_err(|e| Error::Numerical(e.to_string()))?,
        y: Array1::from(y),
        dropped,
    })
}

/// Per-column standardization fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot standardize zero rows"));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Ok(Self {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        ensure_dim("standardizer width", self.mean.len(), x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub iterations: usize,
    /// Step `η₀ / (1 + i / decay)` at iteration `i`.
    pub learning_rate: f64,
    pub decay: f64,
    /// L2 penalty on the weights (not the intercept).
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 1.0,
            decay: 1000.0,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_labels(y: ArrayView1<f64>) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    Ok(())
}

impl LogisticModel {
    /// Gradient of the mean logistic loss (plus penalty), weights then intercept.
    pub fn gradient(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> Array1<f64> {
        let w = ArrayView1::from(&self.weights);
        let margins = x.dot(&w) + self.intercept;
        let n = x.nrows() as f64;
        // d/dz log(1 + e^{−yz}) = −y σ(−yz)
        let g = Array1::from_iter(margins.iter().zip(y.iter()).map(|(&z, &yi)| -yi * sigmoid(-yi * z) / n));
        let mut grad = Array1::zeros(w.len() + 1);
        grad.slice_mut(ndarray::s![..w.len()]).assign(&(x.t().dot(&g) + &(l2 * &w)));
        grad[w.len()] = g.sum();
        grad
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        ensure_dim("logistic feature width", self.weights.len(), x.ncols())?;
        Ok(x.dot(&ArrayView1::from(&self.weights)) + self.intercept)
    }

    pub fn predict_labels(&self, x: ArrayView2<f64>) -> Result<Vec<i8>> {
        Ok(self.decision(x)?.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
    }
}

/// Full-batch gradient descent from zero for a fixed number of iterations.
pub fn train_logistic(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &LogisticConfig) -> Result<LogisticModel> {
    ensure_dim("labels vs rows", x.nrows(), y.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite features"));
    }
    check_labels(y)?;
    let mut m = LogisticModel {
        weights: vec![0.0; x.ncols()],
        intercept: 0.0,
    };
    for i in 0..cfg.iterations {
        let g = m.gradient(x, y, cfg.l2);
        let eta = cfg.learning_rate / (1.0 + i as f64 / cfg.decay);
        for (w, gi) in m.weights.iter_mut().zip(g.iter()) {
            *w -= eta * gi;
        }
        m.intercept -= eta * g[x.ncols()];
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElmClassifierConfig {
    pub nodes: usize,
    pub scale: f64,
    pub activation: Activation,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for ElmClassifierConfig {
    fn default() -> Self {
        Self {
            nodes: 30,
            scale: 0.01,
            activation: Activation::Sine,
            ridge: 1e-8,
            seed: 1,
        }
    }
}

/// ELM regression on `±1` targets.
pub fn train_elm_classifier(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &ElmClassifierConfig) -> Result<ElmModel> {
    check_labels(y)?;
    let layer = HiddenLayer::random(x.ncols(), cfg.nodes, cfg.scale, cfg.activation, cfg.seed)?;
    ElmModel::fit(layer, x, y, cfg.ridge)
}

/// Sign of the network output; an output of exactly zero maps to `+1`.
pub fn predict_labels(model: &ElmModel, x: ArrayView2<f64>) -> Result<Vec<i8>> {
    Ok(model.predict(x)?.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// Percent.
    pub accuracy: f64,
    /// Percent, for the `+1` class.
    pub f1: f64,
    /// True when precision or recall had a zero denominator and F1 was set to 0.
    pub f1_undefined: bool,
}

pub fn scores(y_true: &[i8], y_pred: &[i8]) -> Result<Scores> {
    ensure_dim("predictions vs labels", y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        correct += (t == p) as usize;
        match (t, p) {
            (1, 1) => tp += 1,
            (-1, 1) => fp += 1,
            (1, -1) => fneg += 1,
            _ => {}
        }
    }
    let accuracy = 100.0 * correct as f64 / y_true.len() as f64;
    if tp + fp == 0 || tp + fneg == 0 || tp == 0 {
        return Ok(Scores {
            accuracy,
            f1: 0.0,
            f1_undefined: tp + fp == 0 || tp + fneg == 0,
        });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Ok(Scores {
        accuracy,
        f1: 100.0 * 2.0 * precision * recall / (precision + recall),
        f1_undefined: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Elm,
    Lr,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Elm => "elm",
            ModelKind::Lr => "lr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub day: usize,
    pub model: ModelKind,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_accuracy: f64,
    pub scores: Scores,
    pub train_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    /// Days used only for training before the first evaluation day.
    pub initial_days: usize,
    pub elm: ElmClassifierConfig,
    pub lr: LogisticConfig,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            initial_days: 30,
            elm: ElmClassifierConfig::default(),
            lr: LogisticConfig::default(),
        }
    }
}

/// For every day after the first `initial_days`, train on all earlier days and
/// score on that day. Fails if any training label is known only after the
/// test day's first feature window opens.
pub fn rolling_protocol(rows: &LabeledRows, cfg: &RollingConfig) -> Result<Vec<DayResult>> {
    let days = rows.days();
    if days.len() <= cfg.initial_days {
        return Err(Error::invalid(format!("{} days leave nothing to test after {} training days", days.len(), cfg.initial_days)));
    }
    if cfg.initial_days == 0 {
        return Err(Error::invalid("need at least one training day"));
    }
    let mut out = Vec::new();
    for &test_day in &days[cfg.initial_days..] {
        let train = rows.select(&rows.rows_of(|d| d < test_day));
        let test = rows.select(&rows.rows_of(|d| d == test_day));
        if test.is_empty() {
            return Err(Error::invalid(format!("day {test_day} has no rows")));
        }
        let max_train = train.label_time.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_test = test.feature_start.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max_train < min_test, "lookahead on day {test_day}: train label at {max_train} >= test start {min_test}");
        out.extend(evaluate_split(&train, &test, test_day, cfg)?);
    }
    Ok(out)
}

/// Trains both models on `train` and scores them on `test`.
pub fn evaluate_split(train: &LabeledRows, test: &LabeledRows, day: usize, cfg: &RollingConfig) -> Result<[DayResult; 2]> {
    let scaler = Standardizer::fit(train.x.view())?;
    let xtr = scaler.transform(train.x.view())?;
    let xte = scaler.transform(test.x.view())?;
    let ytr: Vec<i8> = train.y.iter().map(|&v| v as i8).collect();
    let yte: Vec<i8> = test.y.iter().map(|&v| v as i8).collect();

    let t0 = Instant::now();
    let elm = train_elm_classifier(xtr.view(), train.y.view(), &cfg.elm)?;
    let elm_ms = t0.elapsed().as_secs_f64() * 1e3;
    let t0 = Instant::now();
    let lr = train_logistic(xtr.view(), train.y.view(), &cfg.lr)?;
    let lr_ms = t0.elapsed().as_secs_f64() * 1e3;

    let make = |model, train_pred: Vec<i8>, test_pred: Vec<i8>, ms| -> Result<DayResult> {
        Ok(DayResult {
            day,
            model,
            train_rows: train.len(),
            test_rows: test.len(),
            train_accuracy: scores(&ytr, &train_pred)?.accuracy,
            scores: scores(&yte, &test_pred)?,
            train_ms: ms,
        })
    };
    Ok([
        make(ModelKind::Elm, predict_labels(&elm, xtr.view())?, predict_labels(&elm, xte.view())?, elm_ms)?,
        make(ModelKind::Lr, lr.predict_labels(xtr.view())?, lr.predict_labels(xte.view())?, lr_ms)?,
    ])
}

/// `day, model, train_rows, test_rows, train_accuracy, accuracy, f1`.
pub fn daily_metrics_csv(results: &[DayResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["day", "model", "train_rows", "test_rows", "train_accuracy", "accuracy", "f1"])?;
    for r in results {
        w.write_record([
            r.day.to_string(),
            r.model.name().to_string(),
            r.train_rows.to_string(),
            r.test_rows.to_string(),
            format!("{:.6}", r.train_accuracy),
            format!("{:.6}", r.scores.accuracy),
            format!("{:.6}", r.scores.f1),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

/// `day, model, train_ms`: wall-clock of model fitting only.
pub fn daily_timing_csv(results: &[DayResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["day", "model", "train_ms"])?;
    for r in results {
        w.write_record([r.day.to_string(), r.model.name().to_string(), format!("{:.3}", r.train_ms)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn write_trades_csv(path: impl AsRef<Path>, days: &[DayStream]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ts", "price", "volume"])?;
    for d in days {
        for t in &d.trades {
            w.write_record([format!("{}", t.ts), format!("{}", t.price), format!("{}", t.volume)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `ts, side, level, price, volume`, one row per book level.
pub fn write_snapshots_csv(path: impl AsRef<Path>, days: &[DayStream]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ts", "side", "level", "price", "volume"])?;
    for d in days {
        for s in &d.snapshots {
            for (side, levels) in [("bid", &s.bids), ("ask", &s.asks)] {
                for (i, (p, q)) in levels.iter().enumerate() {
                    w.write_record([format!("{}", s.ts), side.to_string(), i.to_string(), format!("{p}"), format!("{q}")])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_string(path: impl AsRef<Path>, s: &str) -> Result<()> {
    fs::write(path, s)?;
    Ok(())
}
