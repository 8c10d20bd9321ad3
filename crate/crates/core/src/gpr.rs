//! Gaussian-process regression with an RBF kernel and zero prior mean.

use log::{debug, warn};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::cholesky::CholeskyFactorized;
use ndarray_linalg::{Diag, FactorizeCInto, SolveC, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ensure_dim, Error, Result};
use crate::metrics::rmse;

const PREDICT_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprParams {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub sigma_n: f64,
}

impl Default for GprParams {
    fn default() -> Self {
        Self {
            sigma_f: 1.0,
            length_scale: 0.5,
            sigma_n: 1e-6,
        }
    }
}

impl GprParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::invalid(format!("length scale must be positive, got {}", self.length_scale)));
        }
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::invalid(format!("sigma_f must be positive, got {}", self.sigma_f)));
        }
        if !(self.sigma_n >= 0.0 && self.sigma_n.is_finite()) {
            return Err(Error::invalid(format!("sigma_n must be >= 0, got {}", self.sigma_n)));
        }
        Ok(())
    }
}

/// `σ_f² exp(−‖x − x′‖² / (2ℓ²))`.
pub fn rbf_kernel(x: ArrayView1<f64>, xp: ArrayView1<f64>, sigma_f: f64, ell: f64) -> f64 {
    let d2: f64 = x.iter().zip(xp.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    sigma_f * sigma_f * (-d2 / (2.0 * ell * ell)).exp()
}

/// Cross-kernel `K(a, b)` through `‖a‖² + ‖b‖² − 2 a·b`.
pub fn kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, p: &GprParams) -> Array2<f64> {
    let na = a.map_axis(Axis(1), |r| r.dot(&r));
    let nb = b.map_axis(Axis(1), |r| r.dot(&r));
    let mut k = a.dot(&b.t());
    let sf2 = p.sigma_f * p.sigma_f;
    let inv = 1.0 / (2.0 * p.length_scale * p.length_scale);
    for ((i, j), v) in k.indexed_iter_mut() {
        let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
        *v = sf2 * (-d2 * inv).exp();
    }
    k
}

pub struct GprModel {
    pub x_train: Array2<f64>,
    /// `(K + σ_n² I)⁻¹ y`.
    pub alpha: Array1<f64>,
    chol: CholeskyFactorized<ndarray::OwnedRepr<f64>>,
    pub params: GprParams,
}

impl std::fmt::Debug for GprModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GprModel")
            .field("n_train", &self.x_train.nrows())
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprPrediction {
    pub mean: Array1<f64>,
    pub variance: Array1<f64>,
    /// Most negative variance before clamping (0 when none was negative).
    pub min_raw_variance: f64,
    pub clamped: usize,
}

pub fn gpr_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &GprParams) -> Result<GprModel> {
    params.validate()?;
    ensure_dim("targets vs training rows", x.nrows(), y.len())?;
    if x.nrows() == 0 {
        return Err(Error::invalid("GPR needs at least one training point"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("GPR inputs contain non-finite entries"));
    }
    let mut k = kernel_matrix(x, x, params);
    let noise = params.sigma_n * params.sigma_n;
    for i in 0..k.nrows() {
        k[[i, i]] += noise;
    }
    let chol = k.factorizec_into(UPLO::Lower).map_err(|e| {
        Error::SingularSystem(format!(
            "kernel matrix is not positive definite ({e}); raise sigma_n above {}",
            params.sigma_n
        ))
    })?;
    let alpha = chol
        .solvec(&y.to_owned())
        .map_err(|e| Error::Numerical(format!("kernel solve: {e}")))?;
    Ok(GprModel {
        x_train: x.to_owned(),
        alpha,
        chol,
        params: *params,
    })
}

impl GprModel {
    pub fn fit_dataset(ds: &Dataset, params: &GprParams) -> Result<Self> {
        gpr_fit(ds.inputs.view(), ds.targets.view(), params)
    }

    /// Predictive mean and variance; negative variances are clamped to zero.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<GprPrediction> {
        ensure_dim("test columns vs training columns", self.x_train.ncols(), x.ncols())?;
        let n = x.nrows();
        let mut mean = Array1::zeros(n);
        let mut variance = Array1::zeros(n);
        let mut min_raw: f64 = 0.0;
        let mut clamped = 0;
        let prior = self.params.sigma_f * self.params.sigma_f;
        for start in (0..n).step_by(PREDICT_BLOCK) {
            let end = (start + PREDICT_BLOCK).min(n);
            let ks = kernel_matrix(self.x_train.view(), x.slice(s![start..end, ..]), &self.params);
            mean.slice_mut(s![start..end]).assign(&ks.t().dot(&self.alpha));
            let v = self
                .chol
                .factor
                .solve_triangular(UPLO::Lower, Diag::NonUnit, &ks)
                .map_err(|e| Error::Numerical(format!("triangular solve: {e}")))?;
            for (i, col) in v.columns().into_iter().enumerate() {
                let raw = prior - col.dot(&col);
                if raw < 0.0 {
                    min_raw = min_raw.min(raw);
                    clamped += 1;
                }
                variance[start + i] = raw.max(0.0);
            }
        }
        if clamped > 0 {
            debug!("clamped {clamped} negative predictive variances (min {min_raw:e})");
        }
        Ok(GprPrediction {
            mean,
            variance,
            min_raw_variance: min_raw,
            clamped,
        })
    }

    /// Posterior mean only; skips the triangular solves behind the variance.
    pub fn predict_mean(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        ensure_dim("test columns vs training columns", self.x_train.ncols(), x.ncols())?;
        let n = x.nrows();
        let mut mean = Array1::zeros(n);
        for start in (0..n).step_by(PREDICT_BLOCK) {
            let end = (start + PREDICT_BLOCK).min(n);
            let ks = kernel_matrix(self.x_train.view(), x.slice(s![start..end, ..]), &self.params);
            mean.slice_mut(s![start..end]).assign(&ks.t().dot(&self.alpha));
        }
        Ok(mean)
    }

    pub fn predict_one(&self, x: ArrayView1<f64>) -> Result<(f64, f64)> {
        let p = self.predict(x.insert_axis(Axis(0)))?;
        Ok((p.mean[0], p.variance[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sigma_f: Vec<f64>,
    pub length_scale: Vec<f64>,
    pub sigma_n: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            sigma_f: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            length_scale: vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
            sigma_n: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: GprParams,
    /// Validation RMSE; infinite when the factorization failed.
    pub rmse: f64,
}

/// Exhaustive search over `σ_f × ℓ`, scored by validation RMSE of the mean.
pub fn grid_search(train: &Dataset, valid: &Dataset, grid: &GridSpec) -> Result<(GprParams, Vec<GridPoint>)> {
    if grid.sigma_f.is_empty() || grid.length_scale.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let mut table = Vec::new();
    for &sigma_f in &grid.sigma_f {
        for &length_scale in &grid.length_scale {
            let params = GprParams {
                sigma_f,
                length_scale,
                sigma_n: grid.sigma_n,
            };
            let score = match GprModel::fit_dataset(train, &params) {
                Ok(m) => {
                    let p = m.predict(valid.inputs.view())?;
                    rmse(p.mean.as_slice().unwrap(), valid.targets.as_slice().unwrap())?
                }
                Err(e) if e.is_numerical() => {
                    warn!("GPR fit failed at {params:?}: {e}");
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            };
            table.push(GridPoint { params, rmse: score });
        }
    }
    let best = table
        .iter()
        .filter(|g| g.rmse.is_finite())
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
        .ok_or_else(|| Error::NoSolution("every grid point failed to factorize".into()))?;
    Ok((best.params, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_at_coincident_points_is_prior_variance() {
        let x = array![0.3, -1.2];
        assert_eq!(rbf_kernel(x.view(), x.view(), 1.5, 0.7), 2.25);
    }

    #[test]
    fn kernel_at_root_two_length_scales() {
        let ell = 0.4;
        let x = array![0.0];
        let y = array![ell * 2f64.sqrt()];
        assert!((rbf_kernel(x.view(), y.view(), 1.0, ell) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_point_alpha() {
        let p = GprParams { sigma_f: 1.3, length_scale: 1.0, sigma_n: 0.2 };
        let m = gpr_fit(array![[0.5]].view(), array![2.0].view(), &p).unwrap();
        assert!((m.alpha[0] - 2.0 / (1.69 + 0.04)).abs() < 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = GprParams { length_scale: 0.0, ..GprParams::default() };
        assert!(gpr_fit(array![[0.5]].view(), array![2.0].view(), &p).is_err());
    }
}
