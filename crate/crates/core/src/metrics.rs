//! Error metrics shared by the experiments.

use crate::error::{ensure_dim, Error, Result};

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    ensure_dim("prediction length", truth.len(), pred.len())?;
    non_empty(truth)?;
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    ensure_dim("prediction length", truth.len(), pred.len())?;
    non_empty(truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len() as f64)
}

/// Mean absolute percentage error, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    /// Rows skipped because `|truth| < MAPE_FLOOR`.
    pub excluded: usize,
}

pub const MAPE_FLOOR: f64 = 1e-8;

pub fn mape(pred: &[f64], truth: &[f64]) -> Result<Mape> {
    ensure_dim("prediction length", truth.len(), pred.len())?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if t.abs() < MAPE_FLOOR {
            continue;
        }
        sum += ((p - t) / t).abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid("MAPE undefined: every target is below the floor"));
    }
    Ok(Mape {
        percent: 100.0 * sum / used as f64,
        excluded: truth.len() - used,
    })
}

/// `‖truth − pred‖₂ / ‖truth‖₂`.
pub fn relative_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    ensure_dim("prediction length", truth.len(), pred.len())?;
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 {
        return Err(Error::invalid("relative error undefined for a zero-norm truth vector"));
    }
    Ok((num / den).sqrt())
}

fn non_empty(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::invalid("metric over an empty sample"))
    } else {
        Ok(())
    }
}
