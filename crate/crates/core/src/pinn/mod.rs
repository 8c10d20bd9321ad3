//! Physics-informed ELM for linear parabolic pricing PDEs.
//!
//! The unknown `f(x, t)` is an ELM over `(x₁…x_m, t)`. Every derivative of the
//! network is linear in `β`, so the PDE residual at interior points, the
//! boundary mismatch and the terminal mismatch stack into one least-squares
//! system `Hβ = Y`.
//!
//! The operator is
//!
//! ```text
//! ∂f/∂t + Σᵢⱼ Aᵢⱼ ∂²f/∂xᵢ∂xⱼ + Σₗ bₗ ∂f/∂xₗ − r f = R(x, t)   on Ω × [0, T)
//! f = B(x, t)  on ∂Ω × [0, T],     f(x, T) = F(x)  on Ω
//! ```
//!
//! The network may see affinely rescaled coordinates; derivatives are mapped
//! back by the chain rule.

pub mod presets;

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::InputScaler;
use crate::elm::{ElmModel, HiddenLayer};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, RidgeOptions};
use crate::rng;

pub use crate::metrics::relative_error;

pub type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

const ROW_BLOCK: usize = 1024;

/// Linear parabolic problem on a box with terminal data at `t = T`.
#[derive(Clone)]
pub struct PdeProblem {
    pub name: String,
    /// `Aᵢⱼ`, symmetric `m × m`.
    pub diffusion: Array2<f64>,
    /// `bₗ`.
    pub drift: Array1<f64>,
    /// `r` in the `−r f` term.
    pub discount: f64,
    pub rhs: SpaceTimeFn,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub horizon: f64,
    pub terminal: SpaceFn,
    pub boundary: SpaceTimeFn,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("diffusion", &self.diffusion)
            .field("drift", &self.drift)
            .field("discount", &self.discount)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl PdeProblem {
    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::invalid("PDE needs at least one space dimension"));
        }
        ensure_dim("diffusion rows", m, self.diffusion.nrows())?;
        ensure_dim("diffusion cols", m, self.diffusion.ncols())?;
        ensure_dim("box lower corner", m, self.lo.len())?;
        ensure_dim("box upper corner", m, self.hi.len())?;
        for i in 0..m {
            for j in 0..i {
                if (self.diffusion[[i, j]] - self.diffusion[[j, i]]).abs() > 1e-14 {
                    return Err(Error::invalid("diffusion matrix must be symmetric"));
                }
            }
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(b > a)) {
            return Err(Error::invalid("degenerate domain box"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(())
    }

    /// Coordinate map sending `Ω × [0, T]` onto `[-1, 1]^{m+1}`.
    pub fn unit_box(&self) -> InputScaler {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo.push(0.0);
        hi.push(self.horizon);
        InputScaler { lo, hi }
    }

    /// Map that leaves coordinates unchanged.
    pub fn identity_map(&self) -> InputScaler {
        let n = self.dim() + 1;
        InputScaler {
            lo: vec![-1.0; n],
            hi: vec![1.0; n],
        }
    }
}

/// Network derivative requested from [`derivative_row`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Value,
    Dt,
    Dx(usize),
    /// Second derivative in `xᵢ, xⱼ` (pure when `i == j`).
    Dxx(usize, usize),
}

/// Row of hidden-node derivatives at `point = (x₁…x_m, t)`, in the layer's own
/// coordinates: entry `k` is `∂h_k` for the requested derivative.
pub fn derivative_row(layer: &HiddenLayer, point: &[f64], spec: Deriv) -> Result<Array1<f64>> {
    let n = layer.input_dim();
    ensure_dim("point length vs layer input dim", n, point.len())?;
    let m = n - 1;
    let check = |i: usize| {
        if i < m {
            Ok(())
        } else {
            Err(Error::invalid(format!("space index {i} out of range for m = {m}")))
        }
    };
    let z = layer.weights.dot(&ArrayView1::from(point)) + &layer.biases;
    let g = layer.activation;
    let w = &layer.weights;
    Ok(match spec {
        Deriv::Value => z.mapv(|v| g.eval(v)),
        Deriv::Dt => Array1::from_iter(z.iter().enumerate().map(|(k, &v)| w[[k, m]] * g.first(v))),
        Deriv::Dx(l) => {
            check(l)?;
            Array1::from_iter(z.iter().enumerate().map(|(k, &v)| w[[k, l]] * g.first(v)))
        }
        Deriv::Dxx(i, j) => {
            check(i)?;
            check(j)?;
            Array1::from_iter(z.iter().enumerate().map(|(k, &v)| w[[k, i]] * w[[k, j]] * g.second(v)))
        }
    })
}

/// Sampled points, one row per point, columns `(x₁…x_m, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub interior: Array2<f64>,
    pub boundary: Array2<f64>,
    pub terminal: Array2<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationCounts {
    pub interior: usize,
    pub boundary: usize,
    pub terminal: usize,
    /// Share of interior points drawn from `t ∈ [0.9T, T]`.
    pub near_expiry: f64,
}

impl Default for CollocationCounts {
    fn default() -> Self {
        Self {
            interior: 6000,
            boundary: 2000,
            terminal: 2000,
            near_expiry: 0.25,
        }
    }
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.interior.nrows() + self.boundary.nrows() + self.terminal.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uniform draws in each region; boundary faces are chosen with
    /// probability proportional to their area.
    pub fn sample(problem: &PdeProblem, counts: &CollocationCounts, seed: u64) -> Result<Self> {
        problem.validate()?;
        if counts.interior == 0 || counts.boundary == 0 || counts.terminal == 0 {
            return Err(Error::invalid("every collocation block needs at least one point"));
        }
        if !(0.0..=1.0).contains(&counts.near_expiry) {
            return Err(Error::invalid("near_expiry share must lie in [0, 1]"));
        }
        let m = problem.dim();
        let t_end = problem.horizon;
        let (lo, hi) = (&problem.lo, &problem.hi);
        let mut rng = rng::stream(seed, "collocation");
        let point = |rng: &mut rng::StreamRng| -> Vec<f64> { (0..m).map(|l| rng.random_range(lo[l]..=hi[l])).collect() };

        let n_late = (counts.near_expiry * counts.interior as f64).round() as usize;
        let mut interior = Array2::zeros((counts.interior, m + 1));
        for i in 0..counts.interior {
            let x = point(&mut rng);
            let t = if i < n_late {
                rng.random_range(0.9 * t_end..=t_end)
            } else {
                rng.random_range(0.0..=t_end)
            };
            interior.slice_mut(s![i, ..m]).assign(&ArrayView1::from(&x));
            interior[[i, m]] = t;
        }

        // Face l (lower or upper) has area Π_{j≠l}(hi_j − lo_j) · T.
        let widths: Vec<f64> = (0..m).map(|l| hi[l] - lo[l]).collect();
        let face_area: Vec<f64> = (0..m)
            .map(|l| (0..m).filter(|&j| j != l).map(|j| widths[j]).product::<f64>())
            .collect();
        let total: f64 = 2.0 * face_area.iter().sum::<f64>();
        let mut boundary = Array2::zeros((counts.boundary, m + 1));
        for i in 0..counts.boundary {
            let mut x = point(&mut rng);
            let mut u = rng.random_range(0.0..total);
            let mut face = 0;
            while face < 2 * m - 1 && u >= face_area[face / 2] {
                u -= face_area[face / 2];
                face += 1;
            }
            let l = face / 2;
            x[l] = if face % 2 == 0 { lo[l] } else { hi[l] };
            boundary.slice_mut(s![i, ..m]).assign(&ArrayView1::from(&x));
            boundary[[i, m]] = rng.random_range(0.0..=t_end);
        }

        let mut terminal = Array2::zeros((counts.terminal, m + 1));
        for i in 0..counts.terminal {
            let x = point(&mut rng);
            terminal.slice_mut(s![i, ..m]).assign(&ArrayView1::from(&x));
            terminal[[i, m]] = t_end;
        }
        Ok(Self {
            interior,
            boundary,
            terminal,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    /// Each block's rows scaled by `1/√N_block`.
    InverseSqrtCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Interior,
    Boundary,
    Terminal,
}

/// Network with its coordinate map, plus per-node operator coefficients.
struct Operator<'a> {
    problem: &'a PdeProblem,
    layer: &'a HiddenLayer,
    map: &'a InputScaler,
    /// Per node: `w_t + Σ bₗ wₗ` in original coordinates.
    first: Array1<f64>,
    /// Per node: `Σ Aᵢⱼ wᵢ wⱼ` in original coordinates.
    second: Array1<f64>,
}

impl<'a> Operator<'a> {
    fn new(problem: &'a PdeProblem, layer: &'a HiddenLayer, map: &'a InputScaler) -> Result<Self> {
        problem.validate()?;
        let m = problem.dim();
        ensure_dim("layer input dim vs m + 1", m + 1, layer.input_dim())?;
        ensure_dim("coordinate map width vs m + 1", m + 1, map.lo.len())?;
        // ∂ξ/∂p per input coordinate.
        let dscale: Vec<f64> = map.lo.iter().zip(&map.hi).map(|(lo, hi)| 2.0 / (hi - lo)).collect();
        let l = layer.nodes();
        let w = |k: usize, i: usize| layer.weights[[k, i]] * dscale[i];
        let first = Array1::from_iter((0..l).map(|k| w(k, m) + (0..m).map(|i| problem.drift[i] * w(k, i)).sum::<f64>()));
        let second = Array1::from_iter((0..l).map(|k| {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    acc += problem.diffusion[[i, j]] * w(k, i) * w(k, j);
                }
            }
            acc
        }));
        Ok(Self {
            problem,
            layer,
            map,
            first,
            second,
        })
    }

    fn pre_activations(&self, pts: ArrayView2<f64>) -> Result<Array2<f64>> {
        let xi = self.map.transform(pts)?;
        self.layer.pre_activations(xi.view())
    }

    /// Rows of `H` and targets for `pts` of one block, unweighted.
    fn rows(&self, pts: ArrayView2<f64>, block: Block) -> Result<(Array2<f64>, Array1<f64>)> {
        let m = self.problem.dim();
        let mut z = self.pre_activations(pts)?;
        let g = self.layer.activation;
        let r = self.problem.discount;
        let targets = Array1::from_iter(pts.rows().into_iter().map(|p| {
            let x = p.slice(s![..m]).to_vec();
            let t = p[m];
            match block {
                Block::Interior => (self.problem.rhs)(&x, t),
                Block::Boundary => (self.problem.boundary)(&x, t),
                Block::Terminal => (self.problem.terminal)(&x),
            }
        }));
        match block {
            Block::Interior => {
                for mut row in z.rows_mut() {
                    for (k, v) in row.iter_mut().enumerate() {
                        let zk = *v;
                        *v = g.first(zk) * self.first[k] + g.second(zk) * self.second[k] - r * g.eval(zk);
                    }
                }
            }
            Block::Boundary | Block::Terminal => z.mapv_inplace(|v| g.eval(v)),
        }
        Ok((z, targets))
    }
}

fn block_weight(weighting: Weighting, n: usize) -> f64 {
    match weighting {
        Weighting::Uniform => 1.0,
        Weighting::InverseSqrtCount => 1.0 / (n as f64).sqrt(),
    }
}

fn blocks(pts: &CollocationSet) -> [(Block, ArrayView2<'_, f64>); 3] {
    [
        (Block::Interior, pts.interior.view()),
        (Block::Boundary, pts.boundary.view()),
        (Block::Terminal, pts.terminal.view()),
    ]
}

/// Stacks interior, boundary and terminal rows (in that order) into `(H, Y)`.
pub fn assemble(
    problem: &PdeProblem,
    layer: &HiddenLayer,
    map: &InputScaler,
    pts: &CollocationSet,
    weighting: Weighting,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let op = Operator::new(problem, layer, map)?;
    let mut hs = Vec::new();
    let mut ys = Vec::new();
    for (block, p) in blocks(pts) {
        if p.nrows() == 0 {
            return Err(Error::invalid(format!("empty {block:?} block")));
        }
        let (mut h, mut y) = op.rows(p, block)?;
        let w = block_weight(weighting, p.nrows());
        h *= w;
        y *= w;
        hs.push(h);
        ys.push(y);
    }
    let h = ndarray::concatenate(Axis(0), &[hs[0].view(), hs[1].view(), hs[2].view()]).map_err(|e| Error::Numerical(e.to_string()))?;
    let y = ndarray::concatenate(Axis(0), &[ys[0].view(), ys[1].view(), ys[2].view()]).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((h, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinnConfig {
    pub nodes: usize,
    pub scale: f64,
    pub activation: Activation,
    pub ridge: f64,
    pub counts: CollocationCounts,
    pub layer_seed: u64,
    pub collocation_seed: u64,
    pub weighting: Weighting,
    /// Feed the network coordinates rescaled to `[-1, 1]`.
    pub normalize: bool,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            nodes: 5000,
            scale: 1.0,
            activation: Activation::Tanh,
            ridge: 1e-10,
            counts: CollocationCounts::default(),
            layer_seed: 1,
            collocation_seed: 2,
            weighting: Weighting::InverseSqrtCount,
            normalize: true,
        }
    }
}

/// RMS residuals on the training points, unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub interior: f64,
    pub boundary: f64,
    pub terminal: f64,
}

#[derive(Debug, Clone)]
pub struct ElmSolution {
    pub model: ElmModel,
    pub map: InputScaler,
    pub problem: PdeProblem,
    pub residuals: Residuals,
}

impl ElmSolution {
    /// Solution values at rows `(x₁…x_m, t)`.
    pub fn predict(&self, pts: ArrayView2<f64>) -> Result<Array1<f64>> {
        let xi = self.map.transform(pts)?;
        self.model.predict_batched(xi.view(), ROW_BLOCK)
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        let mut p = x.to_vec();
        p.push(t);
        let xi = self.map.transform_row(ArrayView1::from(&p))?;
        self.model.predict_one(xi.view())
    }

    /// RMS of `f − B` on the given boundary points.
    pub fn boundary_rms(&self, pts: ArrayView2<f64>) -> Result<f64> {
        let m = self.problem.dim();
        let pred = self.predict(pts)?;
        let ss: f64 = pts
            .rows()
            .into_iter()
            .zip(pred.iter())
            .map(|(p, v)| (v - (self.problem.boundary)(&p.slice(s![..m]).to_vec(), p[m])).powi(2))
            .sum();
        Ok((ss / pts.nrows().max(1) as f64).sqrt())
    }

    /// RMS PDE residual on the given interior points.
    pub fn interior_rms(&self, pts: ArrayView2<f64>) -> Result<f64> {
        let op = Operator::new(&self.problem, &self.model.layer, &self.map)?;
        rms_residual(&op, pts, Block::Interior, &self.model.beta)
    }
}

fn rms_residual(op: &Operator<'_>, pts: ArrayView2<f64>, block: Block, beta: &Array1<f64>) -> Result<f64> {
    let mut ss = 0.0;
    for start in (0..pts.nrows()).step_by(ROW_BLOCK) {
        let end = (start + ROW_BLOCK).min(pts.nrows());
        let (h, y) = op.rows(pts.slice(s![start..end, ..]), block)?;
        let e = h.dot(beta) - y;
        ss += e.dot(&e);
    }
    Ok((ss / pts.nrows().max(1) as f64).sqrt())
}

/// Samples collocation points, draws the layer and solves the ridge system.
pub fn solve_pde(problem: &PdeProblem, cfg: &PinnConfig) -> Result<ElmSolution> {
    let pts = CollocationSet::sample(problem, &cfg.counts, cfg.collocation_seed)?;
    solve_on(problem, cfg, &pts)
}

/// As [`solve_pde`] on a given collocation set. The normal equations are
/// accumulated block by block, so `H` is never held in full unless the
/// Cholesky factorization fails and the SVD fallback needs it.
pub fn solve_on(problem: &PdeProblem, cfg: &PinnConfig, pts: &CollocationSet) -> Result<ElmSolution> {
    let m = problem.dim();
    let layer = HiddenLayer::random(m + 1, cfg.nodes, cfg.scale, cfg.activation, cfg.layer_seed)?;
    let map = if cfg.normalize { problem.unit_box() } else { problem.identity_map() };
    let op = Operator::new(problem, &layer, &map)?;
    let beta = if cfg.ridge == 0.0 {
        let (h, y) = assemble(problem, &layer, &map, pts, cfg.weighting)?;
        linalg::solve_ridge(h.view(), y.view(), 0.0, &RidgeOptions::default())?.beta
    } else {
        let (a, rhs) = normal_equations(&op, pts, cfg)?;
        let strict = RidgeOptions {
            svd_fallback: false,
            ..RidgeOptions::default()
        };
        match linalg::solve_normal_equations(a, rhs, cfg.ridge, || Array2::zeros((0, 0)), ArrayView1::from(&[]), &strict) {
            Ok(fit) => fit.beta,
            Err(_) => {
                let (h, y) = assemble(problem, &layer, &map, pts, cfg.weighting)?;
                linalg::ridge_svd(h.view(), y.view(), cfg.ridge, RidgeOptions::default().rcond)?
            }
        }
    };
    let residuals = Residuals {
        interior: rms_residual(&op, pts.interior.view(), Block::Interior, &beta)?,
        boundary: rms_residual(&op, pts.boundary.view(), Block::Boundary, &beta)?,
        terminal: rms_residual(&op, pts.terminal.view(), Block::Terminal, &beta)?,
    };
    let model = ElmModel::new(layer, beta, cfg.ridge)?;
    Ok(ElmSolution {
        model,
        map,
        problem: problem.clone(),
        residuals,
    })
}

fn normal_equations(op: &Operator<'_>, pts: &CollocationSet, cfg: &PinnConfig) -> Result<(Array2<f64>, Array1<f64>)> {
    let l = op.layer.nodes();
    let mut a = Array2::<f64>::zeros((l, l));
    let mut rhs = Array1::<f64>::zeros(l);
    for (block, p) in blocks(pts) {
        let w = block_weight(cfg.weighting, p.nrows());
        for start in (0..p.nrows()).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(p.nrows());
            let (mut h, mut y) = op.rows(p.slice(s![start..end, ..]), block)?;
            h *= w;
            y *= w;
            linalg::gram_accumulate(&mut a, h.view());
            rhs += &h.t().dot(&y);
        }
    }
    linalg::mirror_upper(&mut a);
    for i in 0..l {
        a[[i, i]] += cfg.ridge;
    }
    Ok((a, rhs))
}

/// Writes `x₁…x_m, t, value[, truth]` for each grid row.
pub fn write_grid_csv(
    path: impl AsRef<Path>,
    names: &[&str],
    pts: ArrayView2<f64>,
    values: ArrayView1<f64>,
    truth: Option<ArrayView1<f64>>,
) -> Result<()> {
    ensure_dim("grid rows vs values", pts.nrows(), values.len())?;
    ensure_dim("column names vs grid width", pts.ncols(), names.len())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = names.to_vec();
    header.push("value");
    if truth.is_some() {
        header.push("truth");
    }
    w.write_record(&header)?;
    for (i, p) in pts.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        rec.push(format!("{:e}", values[i]));
        if let Some(t) = truth {
            rec.push(format!("{:e}", t[i]));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::write(path, bytes)?;
    Ok(())
}
