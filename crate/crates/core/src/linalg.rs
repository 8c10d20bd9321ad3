//! Dense solvers behind ridge training.

use log::warn;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{FactorizeCInto, InverseCInto, JobSvd, SolveC, SVDDC, UPLO};

use crate::error::{ensure_dim, Error, Result};

const GRAM_BLOCK: usize = 256;

/// `HᵀH`, computing only the upper block triangle and mirroring it.
pub fn gram(h: ArrayView2<f64>) -> Array2<f64> {
    let mut g = Array2::<f64>::zeros((h.ncols(), h.ncols()));
    gram_accumulate(&mut g, h);
    mirror_upper(&mut g);
    g
}

/// Adds `HᵀH` to the upper block triangle of `g`; call [`mirror_upper`] once
/// all row blocks have been added.
pub fn gram_accumulate(g: &mut Array2<f64>, h: ArrayView2<f64>) {
    let l = h.ncols();
    let starts: Vec<usize> = (0..l).step_by(GRAM_BLOCK).collect();
    for (bi, &i0) in starts.iter().enumerate() {
        let i1 = (i0 + GRAM_BLOCK).min(l);
        let hi = h.slice(s![.., i0..i1]);
        for &j0 in &starts[bi..] {
            let j1 = (j0 + GRAM_BLOCK).min(l);
            let hj = h.slice(s![.., j0..j1]);
            let mut block = g.slice_mut(s![i0..i1, j0..j1]);
            general_mat_mul(1.0, &hi.t(), &hj, 1.0, &mut block);
        }
    }
}

/// Copies the upper triangle of a square matrix onto its lower triangle.
pub fn mirror_upper(g: &mut Array2<f64>) {
    for i in 0..g.nrows() {
        for j in 0..i {
            g[[i, j]] = g[[j, i]];
        }
    }
}

/// Which factorization produced a ridge solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeSolver {
    Cholesky,
    SvdPseudoinverse,
}

#[derive(Debug, Clone, Copy)]
pub struct RidgeOptions {
    /// Fall back to an SVD pseudoinverse when the Cholesky factorization of
    /// `HᵀH + C·I` fails.
    pub svd_fallback: bool,
    /// Relative singular-value cutoff for the pseudoinverse.
    pub rcond: f64,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self {
            svd_fallback: true,
            rcond: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RidgeFit {
    pub beta: Array1<f64>,
    pub solver: RidgeSolver,
}

fn check_finite(what: &str, xs: impl IntoIterator<Item = f64>) -> Result<()> {
    if xs.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

/// Solves `(HᵀH + C·I) β = HᵀY`.
pub fn solve_ridge(
    h: ArrayView2<f64>,
    y: ArrayView1<f64>,
    c: f64,
    opts: &RidgeOptions,
) -> Result<RidgeFit> {
    ensure_dim("target length vs hidden-matrix rows", h.nrows(), y.len())?;
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(Error::invalid("empty hidden matrix"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("ridge constant must be >= 0, got {c}")));
    }
    check_finite("hidden matrix", h.iter().copied())?;
    check_finite("targets", y.iter().copied())?;

    let mut a = gram(h);
    for i in 0..a.nrows() {
        a[[i, i]] += c;
    }
    let rhs = h.t().dot(&y);
    solve_normal_equations(a, rhs, c, || h.to_owned(), y, opts)
}

/// Solves a pre-assembled system `A β = b` where `A = HᵀH + C·I`. `h_for_svd`
/// is only materialized when the factorization fails and the fallback is on.
pub fn solve_normal_equations(
    a: Array2<f64>,
    rhs: Array1<f64>,
    c: f64,
    h_for_svd: impl FnOnce() -> Array2<f64>,
    y: ArrayView1<f64>,
    opts: &RidgeOptions,
) -> Result<RidgeFit> {
    let max_diag = a.diag().iter().copied().fold(0.0, f64::max);
    let n = a.nrows();
    match a.factorizec_into(UPLO::Lower) {
        Ok(f) if c == 0.0 && rank_deficient_pivots(&f.factor, max_diag, n) => {
            warn!("Cholesky pivots indicate a numerically rank-deficient HᵀH");
        }
        Ok(f) => {
            let beta = f
                .solvec(&rhs)
                .map_err(|e| Error::Numerical(format!("triangular solve: {e}")))?;
            if beta.iter().all(|v| v.is_finite()) {
                return Ok(RidgeFit {
                    beta,
                    solver: RidgeSolver::Cholesky,
                });
            }
            warn!("Cholesky solve produced non-finite weights (C = {c})");
        }
        Err(e) => warn!("Cholesky factorization failed (C = {c}): {e}"),
    }
    if !opts.svd_fallback {
        return Err(Error::SingularSystem(format!(
            "HᵀH + {c}·I is not positive definite and the SVD fallback is disabled"
        )));
    }
    warn!("falling back to SVD pseudoinverse");
    let h = h_for_svd();
    let beta = ridge_svd(h.view(), y, c, opts.rcond)?;
    Ok(RidgeFit {
        beta,
        solver: RidgeSolver::SvdPseudoinverse,
    })
}

// Unregularized systems only: a pivot this small means HᵀH is singular to
// working precision even though the factorization ran to completion.
fn rank_deficient_pivots(factor: &Array2<f64>, max_diag: f64, n: usize) -> bool {
    let min_pivot = factor.diag().iter().fold(f64::INFINITY, |m, &v| m.min(v * v));
    min_pivot <= 10.0 * n as f64 * f64::EPSILON * max_diag
}

/// Ridge (or, for `c = 0`, minimum-norm least-squares) solution through the
/// SVD of `H`: `β = V diag(s / (s² + C)) Uᵀ Y`, dropping singular values
/// below `rcond · s_max`.
pub fn ridge_svd(h: ArrayView2<f64>, y: ArrayView1<f64>, c: f64, rcond: f64) -> Result<Array1<f64>> {
    ensure_dim("target length vs hidden-matrix rows", h.nrows(), y.len())?;
    let (u, sv, vt) = h
        .to_owned()
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Numerical(format!("SVD failed: {e}")))?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD returned no singular vectors".into())),
    };
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = rcond * smax;
    let uty = u.t().dot(&y);
    let scaled = Array1::from_iter(sv.iter().zip(uty.iter()).map(|(&s, &b)| {
        if s > cutoff {
            b * s / (s * s + c)
        } else {
            0.0
        }
    }));
    Ok(vt.t().dot(&scaled))
}

/// Moore-Penrose pseudoinverse of `a` via SVD.
pub fn pinv(a: ArrayView2<f64>, rcond: f64) -> Result<Array2<f64>> {
    let (u, sv, vt) = a
        .to_owned()
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Numerical(format!("SVD failed: {e}")))?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD returned no singular vectors".into())),
    };
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let inv: Array1<f64> = sv.mapv(|s| if s > rcond * smax { 1.0 / s } else { 0.0 });
    let v_scaled = vt.t().to_owned() * &inv.insert_axis(Axis(0));
    Ok(v_scaled.dot(&u.t()))
}

/// Regularized pseudoinverse `D = (HᵀH + C·I)⁻¹Hᵀ`, `L × N`. For `c = 0`
/// this is the Moore-Penrose pseudoinverse.
pub fn ridge_operator(h: ArrayView2<f64>, c: f64, rcond: f64) -> Result<Array2<f64>> {
    if c == 0.0 {
        return pinv(h, rcond);
    }
    let mut a = gram(h);
    for i in 0..a.nrows() {
        a[[i, i]] += c;
    }
    let inv = a
        .invc_into()
        .map_err(|e| Error::SingularSystem(format!("HᵀH + {c}·I: {e}")))?;
    Ok(inv.dot(&h.t()))
}
