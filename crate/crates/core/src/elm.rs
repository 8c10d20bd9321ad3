//! Randomized single-hidden-layer networks trained by ridge least squares.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, RidgeFit, RidgeOptions};
use crate::rng;

/// Random input-to-hidden map: `L` nodes over `d` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// `L × d`, row `i` is `w_i`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
    /// Standard deviation of the zero-mean normal the entries were drawn from.
    pub scale: f64,
    pub seed: u64,
}

impl HiddenLayer {
    /// Draws every weight and bias i.i.d. from `Normal(0, scale²)`.
    pub fn random(d: usize, l: usize, scale: f64, activation: Activation, seed: u64) -> Result<Self> {
        if d == 0 || l == 0 {
            return Err(Error::invalid(format!(
                "input dim and node count must be >= 1 (got d={d}, L={l})"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng::stream(seed, "hidden-layer");
        // Node-major so that a layer with more nodes extends a smaller one.
        let mut weights = Array2::zeros((l, d));
        let mut biases = Array1::zeros(l);
        for i in 0..l {
            for j in 0..d {
                weights[[i, j]] = normal.sample(&mut rng);
            }
            biases[i] = normal.sample(&mut rng);
        }
        Ok(Self {
            weights,
            biases,
            activation,
            scale,
            seed,
        })
    }

    pub fn from_parts(
        weights: Array2<f64>,
        biases: Array1<f64>,
        activation: Activation,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        ensure_dim("bias length vs node count", weights.nrows(), biases.len())?;
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::invalid("empty hidden layer"));
        }
        Ok(Self {
            weights,
            biases,
            activation,
            scale,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn nodes(&self) -> usize {
        self.weights.nrows()
    }

    /// Pre-activations `z_{ji} = w_i · x_j + b_i`.
    pub fn pre_activations(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        ensure_dim("input columns vs layer input dim", self.input_dim(), x.ncols())?;
        let mut z = x.dot(&self.weights.t());
        z += &self.biases.view().insert_axis(Axis(0));
        Ok(z)
    }

    /// Hidden output matrix `H`, `N × L`.
    pub fn hidden_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.pre_activations(x)?;
        let g = self.activation;
        z.mapv_inplace(|v| g.eval(v));
        Ok(z)
    }

    /// Hidden output row for one input point.
    pub fn hidden_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        ensure_dim("input length vs layer input dim", self.input_dim(), x.len())?;
        let g = self.activation;
        let mut z = self.weights.dot(&x);
        Zip::from(&mut z).and(&self.biases).for_each(|z, &b| *z = g.eval(*z + b));
        Ok(z)
    }
}

/// Ridge solution `β = (HᵀH + C·I)⁻¹HᵀY` with the default solver options.
pub fn fit_ridge(h: ArrayView2<f64>, y: ArrayView1<f64>, c: f64) -> Result<Array1<f64>> {
    Ok(linalg::solve_ridge(h, y, c, &RidgeOptions::default())?.beta)
}

pub fn fit_ridge_with(
    h: ArrayView2<f64>,
    y: ArrayView1<f64>,
    c: f64,
    opts: &RidgeOptions,
) -> Result<RidgeFit> {
    linalg::solve_ridge(h, y, c, opts)
}

/// Trained network: hidden layer plus output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    pub layer: HiddenLayer,
    pub beta: Array1<f64>,
    pub ridge: f64,
}

impl ElmModel {
    pub fn new(layer: HiddenLayer, beta: Array1<f64>, ridge: f64) -> Result<Self> {
        ensure_dim("output weights vs node count", layer.nodes(), beta.len())?;
        Ok(Self { layer, beta, ridge })
    }

    /// Builds `H` on `x` and solves for `β`.
    pub fn fit(layer: HiddenLayer, x: ArrayView2<f64>, y: ArrayView1<f64>, ridge: f64) -> Result<Self> {
        let h = layer.hidden_matrix(x)?;
        let beta = fit_ridge(h.view(), y, ridge)?;
        Self::new(layer, beta, ridge)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.layer.hidden_matrix(x)?.dot(&self.beta))
    }

    /// Same as [`predict`](Self::predict), but the hidden matrix is built
    /// `batch` rows at a time.
    pub fn predict_batched(&self, x: ArrayView2<f64>, batch: usize) -> Result<Array1<f64>> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        ensure_dim("input columns vs layer input dim", self.layer.input_dim(), x.ncols())?;
        let mut out = Array1::zeros(x.nrows());
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + batch).min(x.nrows());
            let h = self.layer.hidden_matrix(x.slice(s![start..end, ..]))?;
            out.slice_mut(s![start..end]).assign(&h.dot(&self.beta));
            start = end;
        }
        Ok(out)
    }

    pub fn predict_one(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.layer.hidden_row(x)?.dot(&self.beta))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(&ModelFile::from(self))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }
}

const MODEL_FORMAT: &str = "elmfin-model";
const MODEL_VERSION: u32 = 1;

/// On-disk layout. Floats are written with shortest round-trip formatting, so
/// save/load is bit-exact.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    d: usize,
    nodes: usize,
    scale: f64,
    seed: u64,
    activation: Activation,
    ridge: f64,
    /// Row-major `L × d`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    beta: Vec<f64>,
}

impl From<&ElmModel> for ModelFile {
    fn from(m: &ElmModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            d: m.layer.input_dim(),
            nodes: m.layer.nodes(),
            scale: m.layer.scale,
            seed: m.layer.seed,
            activation: m.layer.activation,
            ridge: m.ridge,
            weights: m.layer.weights.iter().copied().collect(),
            biases: m.layer.biases.to_vec(),
            beta: m.beta.to_vec(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<ElmModel> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model container {} v{}",
                self.format, self.version
            )));
        }
        ensure_dim("stored weights", self.d * self.nodes, self.weights.len())?;
        let weights = Array2::from_shape_vec((self.nodes, self.d), self.weights)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let layer = HiddenLayer::from_parts(
            weights,
            Array1::from(self.biases),
            self.activation,
            self.scale,
            self.seed,
        )?;
        ElmModel::new(layer, Array1::from(self.beta), self.ridge)
    }
}
