//! EIR-ELM: grow the hidden layer one node at a time, picking the best of `k`
//! random candidates by regularized cost.
//!
//! With `D = (HᵀH + C·I)⁻¹Hᵀ` and a candidate column `v`, the grown operator is
//!
//! ```text
//! M = vᵀ(I − HD) / (vᵀ(I − HD)v + C)
//! L = D(I − vM)
//! D' = [L; M],  β' = D'T
//! ```
//!
//! which is the block-inverse (Schur complement) update of the ridge operator,
//! exact for every `C ≥ 0`. Nothing of size `N × N` is formed: each candidate
//! costs `O(N·s)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{debug, warn};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::Dataset;
use crate::elm::{ElmModel, HiddenLayer};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg;
use crate::rng::{self, StreamRng};

const RCOND: f64 = 1e-12;

/// How the operator `D` and weights `β` are carried from step to step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Rank-one recursion.
    Recursive,
    /// Re-solve the grown system from scratch after every accepted node.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EirConfig {
    pub n0: usize,
    pub n_max: usize,
    /// Target training RMSE; growth stops once it is reached.
    pub epsilon: f64,
    /// Candidates per step.
    pub k: usize,
    pub ridge: f64,
    pub seed: u64,
    pub scale: f64,
    pub activation: Activation,
    pub mode: UpdateMode,
    /// Draws allowed per candidate slot before the step is abandoned.
    pub max_attempts: usize,
}

impl Default for EirConfig {
    fn default() -> Self {
        Self {
            n0: 1,
            n_max: 500,
            epsilon: 1e-3,
            k: 10,
            ridge: 1e-8,
            seed: 0,
            scale: 1.0,
            activation: Activation::Sine,
            mode: UpdateMode::Recursive,
            max_attempts: 10,
        }
    }
}

impl EirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n0 > self.n_max {
            return Err(Error::invalid(format!(
                "need 1 <= n0 <= n_max (got n0={}, n_max={})",
                self.n0, self.n_max
            )));
        }
        if self.k == 0 || self.max_attempts == 0 {
            return Err(Error::invalid("k and max_attempts must be >= 1"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge constant must be >= 0, got {}", self.ridge)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        Ok(())
    }
}

/// Supplies candidate nodes `(w, b)`.
pub trait CandidateSource {
    fn next_candidate(&mut self, step: usize) -> (Array1<f64>, f64);
}

/// Normal(0, scale²) candidates; step `s` draws from its own substream, so a
/// run with larger `k` sees a superset of the candidates of a smaller one.
pub struct RandomCandidates {
    dim: usize,
    normal: Normal<f64>,
    seed: u64,
    step: Option<usize>,
    rng: StreamRng,
}

impl RandomCandidates {
    pub fn new(dim: usize, scale: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self {
            dim,
            normal,
            seed,
            step: None,
            rng: rng::stream(seed, "eir-candidates"),
        })
    }
}

impl CandidateSource for RandomCandidates {
    fn next_candidate(&mut self, step: usize) -> (Array1<f64>, f64) {
        if self.step != Some(step) {
            self.rng = rng::substream(self.seed, "eir-candidates", step as u64);
            self.step = Some(step);
        }
        let w = Array1::from_iter((0..self.dim).map(|_| self.normal.sample(&mut self.rng)));
        let b = self.normal.sample(&mut self.rng);
        (w, b)
    }
}

/// Running solution after `s` nodes.
#[derive(Debug, Clone)]
pub struct EirState {
    /// `Hᵀ`, `s × N` (node-major so that growth appends a row).
    pub ht: Array2<f64>,
    /// `D`, `s × N`.
    pub d: Array2<f64>,
    pub beta: Array1<f64>,
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// `Hβ − T` on the training rows.
    pub residual: Array1<f64>,
    pub ridge: f64,
    /// Training RMSE.
    pub accuracy: f64,
    /// `‖Hβ − T‖² + C‖β‖²`.
    pub cost: f64,
    /// Steps taken so far.
    pub steps: usize,
}

impl EirState {
    pub fn nodes(&self) -> usize {
        self.beta.len()
    }

    /// Hidden output matrix `H`, `N × s`.
    pub fn h(&self) -> Array2<f64> {
        self.ht.t().to_owned()
    }

    pub fn model(&self, activation: Activation, scale: f64, seed: u64) -> Result<ElmModel> {
        let layer = HiddenLayer::from_parts(self.weights.clone(), self.biases.clone(), activation, scale, seed)?;
        ElmModel::new(layer, self.beta.clone(), self.ridge)
    }

    fn refresh(&mut self, targets: ArrayView1<f64>) {
        self.residual = self.ht.t().dot(&self.beta) - &targets;
        let n = targets.len() as f64;
        let rss = self.residual.dot(&self.residual);
        self.accuracy = (rss / n).sqrt();
        self.cost = rss + self.ridge * self.beta.dot(&self.beta);
    }
}

/// Draws `n0` nodes and solves the initial ridge system directly.
pub fn eir_init(data: &Dataset, cfg: &EirConfig) -> Result<EirState> {
    cfg.validate()?;
    let layer = HiddenLayer::random(data.dim(), cfg.n0, cfg.scale, cfg.activation, cfg.seed)?;
    eir_init_with_layer(data, &layer, cfg.ridge)
}

/// Initial state from a given layer.
pub fn eir_init_with_layer(data: &Dataset, layer: &HiddenLayer, ridge: f64) -> Result<EirState> {
    let h = layer.hidden_matrix(data.inputs.view())?;
    if ridge == 0.0 {
        // Rank check only; D itself comes from the pseudoinverse below.
        let strict = linalg::RidgeOptions {
            svd_fallback: false,
            ..linalg::RidgeOptions::default()
        };
        linalg::solve_ridge(h.view(), data.targets.view(), 0.0, &strict)?;
    }
    let d = linalg::ridge_operator(h.view(), ridge, RCOND)?;
    let beta = d.dot(&data.targets);
    if !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::SingularSystem("initial ridge system has no finite solution".into()));
    }
    let mut state = EirState {
        ht: h.t().as_standard_layout().into_owned(),
        d,
        beta,
        weights: layer.weights.as_standard_layout().into_owned(),
        biases: layer.biases.clone(),
        residual: Array1::zeros(data.len()),
        ridge,
        accuracy: f64::INFINITY,
        cost: f64::INFINITY,
        steps: 0,
    };
    state.refresh(data.targets.view());
    Ok(state)
}

/// Outcome of one growth step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Cost of the accepted candidate.
    pub cost: f64,
    /// Index of the accepted candidate among the `k` slots.
    pub chosen: usize,
    /// Candidates discarded as numerically dependent on the current nodes.
    pub rejected: usize,
}

struct Scored {
    w: Array1<f64>,
    b: f64,
    v: Array1<f64>,
    a: Array1<f64>,
    r: Array1<f64>,
    delta: f64,
    m: f64,
    cost: f64,
}

fn score(state: &EirState, targets: ArrayView1<f64>, w: Array1<f64>, b: f64, v: Array1<f64>) -> Option<Scored> {
    let mut a = state.d.dot(&v);
    let mut r = &v - &state.ht.t().dot(&a);
    let vv = v.dot(&v);
    let delta = if state.ridge == 0.0 {
        // HD is then the orthogonal projector onto range(H); a second pass
        // removes what the first one left behind in finite precision.
        let a2 = state.d.dot(&r);
        r -= &state.ht.t().dot(&a2);
        a += &a2;
        r.dot(&r)
    } else {
        // vᵀ(I − HD)v + C = ‖r‖² + C‖a‖² + C, without the cancellation.
        r.dot(&r) + state.ridge * (a.dot(&a) + 1.0)
    };
    // With C = 0 a vanishing Schur complement means v lies in range(H); with
    // C > 0 it is bounded below by C.
    let floor = if state.ridge == 0.0 { 1e-10 * vv.max(f64::MIN_POSITIVE) } else { 0.0 };
    if !delta.is_finite() || delta <= floor {
        return None;
    }
    let m = r.dot(&targets) / delta;
    let res = &state.residual + &(m * &r);
    let beta_top = &state.beta - &(m * &a);
    let norm_sq = beta_top.dot(&beta_top) + m * m;
    let cost = res.dot(&res) + state.ridge * norm_sq;
    cost.is_finite().then_some(Scored {
        w,
        b,
        v,
        a,
        r,
        delta,
        m,
        cost,
    })
}

/// Adds one node: draws `cfg.k` candidates from `source`, keeps the one with
/// the smallest cost (lowest index on ties), and updates `D` and `β`.
pub fn eir_step(
    state: &mut EirState,
    data: &Dataset,
    cfg: &EirConfig,
    source: &mut dyn CandidateSource,
) -> Result<StepReport> {
    ensure_dim("training rows vs state rows", state.residual.len(), data.len())?;
    let targets = data.targets.view();
    let step = state.steps;
    let mut best: Option<(usize, Scored)> = None;
    let mut rejected = 0;
    for slot in 0..cfg.k {
        let mut scored = None;
        for _ in 0..cfg.max_attempts {
            let (w, b) = source.next_candidate(step);
            ensure_dim("candidate weight length vs input dim", state.weights.ncols(), w.len())?;
            let v = column(&w, b, cfg.activation, data);
            match score(state, targets, w, b, v) {
                Some(s) => {
                    scored = Some(s);
                    break;
                }
                None => {
                    rejected += 1;
                    debug!("step {step}: candidate {slot} rejected, resampling");
                }
            }
        }
        let Some(s) = scored else {
            return Err(Error::BudgetExhausted(format!(
                "step {step}: {} consecutive candidates were dependent on the current nodes",
                cfg.max_attempts
            )));
        };
        if best.as_ref().is_none_or(|(_, b)| s.cost < b.cost) {
            best = Some((slot, s));
        }
    }
    if rejected > 0 {
        warn!("step {step}: {rejected} candidate(s) rejected and resampled");
    }
    let (chosen, s) = best.expect("k >= 1");
    commit(state, data, cfg.mode, s)?;
    Ok(StepReport {
        cost: state.cost,
        chosen,
        rejected,
    })
}

fn column(w: &Array1<f64>, b: f64, g: Activation, data: &Dataset) -> Array1<f64> {
    let mut v = data.inputs.dot(w);
    v.mapv_inplace(|z| g.eval(z + b));
    v
}

fn commit(state: &mut EirState, data: &Dataset, mode: UpdateMode, s: Scored) -> Result<()> {
    let targets = data.targets.view();
    state.ht.push_row(s.v.view()).map_err(|e| Error::Numerical(e.to_string()))?;
    state.weights.push_row(s.w.view()).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut biases = state.biases.to_vec();
    biases.push(s.b);
    state.biases = Array1::from(biases);
    state.steps += 1;
    match mode {
        UpdateMode::Recursive => {
            let m_row = &s.r / s.delta;
            // L = D − a·M
            state.d -= &(s.a.view().insert_axis(Axis(1)).dot(&m_row.view().insert_axis(Axis(0))));
            state.d.push_row(m_row.view()).map_err(|e| Error::Numerical(e.to_string()))?;
            let mut beta = (&state.beta - &(s.m * &s.a)).to_vec();
            beta.push(s.m);
            state.beta = Array1::from(beta);
        }
        UpdateMode::Exact => {
            let h = state.h();
            state.d = linalg::ridge_operator(h.view(), state.ridge, RCOND)?;
            state.beta = state.d.dot(&targets);
        }
    }
    state.refresh(targets);
    Ok(())
}

/// One row of the growth trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub s: usize,
    pub cost: f64,
    pub epsilon_s: f64,
    pub wall_ms: f64,
    /// `None` for the initial row.
    pub chosen: Option<usize>,
    pub test_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EirRun {
    pub model: ElmModel,
    pub trace: Vec<TraceRow>,
    pub state: EirState,
}

impl EirRun {
    /// Smallest node count whose test RMSE is at or below `target`.
    pub fn nodes_to_reach(&self, target: f64) -> Option<usize> {
        self.trace
            .iter()
            .find(|r| r.test_rmse.is_some_and(|e| e <= target))
            .map(|r| r.s)
    }
}

/// Grows while `s < n_max` and the training RMSE exceeds `epsilon`. When a
/// test set is given its RMSE is tracked in the trace.
pub fn eir_train(data: &Dataset, test: Option<&Dataset>, cfg: &EirConfig) -> Result<EirRun> {
    let mut source = RandomCandidates::new(data.dim(), cfg.scale, cfg.seed)?;
    eir_train_with(data, test, cfg, &mut source)
}

pub fn eir_train_with(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &EirConfig,
    source: &mut dyn CandidateSource,
) -> Result<EirRun> {
    cfg.validate()?;
    if let Some(t) = test {
        ensure_dim("test input dim vs training input dim", data.dim(), t.dim())?;
    }
    let start = Instant::now();
    let mut state = eir_init(data, cfg)?;
    let mut test_ht = match test {
        Some(t) => Some(
            HiddenLayer::from_parts(state.weights.clone(), state.biases.clone(), cfg.activation, cfg.scale, cfg.seed)?
                .hidden_matrix(t.inputs.view())?
                .reversed_axes()
                .as_standard_layout()
                .into_owned(),
        ),
        None => None,
    };
    let test_rmse = |ht: &Option<Array2<f64>>, beta: &Array1<f64>| -> Option<f64> {
        let (ht, t) = (ht.as_ref()?, test?);
        let err = ht.t().dot(beta) - &t.targets;
        Some((err.dot(&err) / t.len() as f64).sqrt())
    };
    let mut trace = vec![TraceRow {
        s: state.nodes(),
        cost: state.cost,
        epsilon_s: state.accuracy,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        chosen: None,
        test_rmse: test_rmse(&test_ht, &state.beta),
    }];
    while state.nodes() < cfg.n_max && state.accuracy > cfg.epsilon {
        let t0 = Instant::now();
        let report = eir_step(&mut state, data, cfg, source)?;
        if let (Some(ht), Some(t)) = (test_ht.as_mut(), test) {
            let last = state.nodes() - 1;
            let w = state.weights.row(last).to_owned();
            let v = column(&w, state.biases[last], cfg.activation, t);
            ht.push_row(v.view()).map_err(|e| Error::Numerical(e.to_string()))?;
        }
        trace.push(TraceRow {
            s: state.nodes(),
            cost: report.cost,
            epsilon_s: state.accuracy,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            chosen: Some(report.chosen),
            test_rmse: test_rmse(&test_ht, &state.beta),
        });
    }
    let model = state.model(cfg.activation, cfg.scale, cfg.seed)?;
    Ok(EirRun { model, trace, state })
}

fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Growth trace as CSV. `with_timing = false` drops `wall_ms` so the file is
/// reproducible byte for byte.
pub fn trace_csv(trace: &[TraceRow], with_timing: bool) -> String {
    let mut out = String::from(if with_timing {
        "s,J,epsilon_s,wall_ms,chosen_candidate,test_rmse\n"
    } else {
        "s,J,epsilon_s,chosen_candidate,test_rmse\n"
    });
    for r in trace {
        let _ = write!(out, "{},{:e},{:e},", r.s, r.cost, r.epsilon_s);
        if with_timing {
            let _ = write!(out, "{:.3},", r.wall_ms);
        }
        let _ = writeln!(out, "{},{}", fmt_opt(r.chosen), fmt_opt(r.test_rmse.map(|e| format!("{e:e}"))));
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRow], with_timing: bool) -> Result<()> {
    fs::write(path, trace_csv(trace, with_timing))?;
    Ok(())
}

/// Relative deviation `‖a − b‖ / ‖b‖`.
pub fn relative_deviation(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let diff = &a - &b;
    diff.dot(&diff).sqrt() / b.dot(&b).sqrt().max(f64::MIN_POSITIVE)
}
