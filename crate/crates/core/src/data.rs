//! Tabular regression data and input scaling.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::rng;

/// `N × d` inputs with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Array1<f64>, feature_names: Vec<String>) -> Result<Self> {
        ensure_dim("targets vs input rows", inputs.nrows(), targets.len())?;
        ensure_dim("feature names vs input columns", inputs.ncols(), feature_names.len())?;
        if inputs.nrows() == 0 {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if !inputs.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Self {
            inputs,
            targets,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.inputs.select(Axis(0), rows),
            self.targets.select(Axis(0), rows),
            self.feature_names.clone(),
        )
    }

    pub fn head(&self, n: usize) -> Result<Self> {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&rows)
    }

    /// Random partition with `round(train_frac · N)` training rows.
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(Error::invalid(format!("train fraction must lie in (0,1), got {train_frac}")));
        }
        let n = self.len();
        let n_train = (train_frac * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::invalid(format!(
                "degenerate split: {n_train} of {n} rows in the training set"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(seed, "train-test-split"));
        let (tr, te) = idx.split_at(n_train);
        Ok((self.select(tr)?, self.select(te)?))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push(target_name.to_string());
        w.write_record(&header)?;
        for (row, y) in self.inputs.outer_iter().zip(self.targets.iter()) {
            let rec: Vec<String> = row.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV whose last column is the target.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(Error::Parse("dataset CSV needs at least one feature and a target".into()));
        }
        let d = header.len() - 1;
        let mut flat = Vec::new();
        let mut targets = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            ensure_dim("CSV record width", d + 1, rec.len())?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{field}`")))?;
                if j < d {
                    flat.push(v);
                } else {
                    targets.push(v);
                }
            }
        }
        let n = targets.len();
        let inputs = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(inputs, Array1::from(targets), header[..d].to_vec())
    }
}

/// Per-column affine map of fixed bounds `[lo, hi]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputScaler {
    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        ensure_dim("scaler bounds", lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::invalid("scaler needs hi > lo in every column"));
        }
        Ok(Self { lo, hi })
    }

    /// Bounds taken from the observed column ranges.
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        let lo: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b))).collect();
        let hi: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b))).collect();
        Self::from_bounds(lo, hi)
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        ensure_dim("scaler width", self.lo.len(), x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            col.mapv_inplace(|v| 2.0 * (v - lo) / (hi - lo) - 1.0);
        }
        Ok(out)
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.transform(x.insert_axis(Axis(0)))?.row(0).to_owned())
    }

    pub fn transform_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        Dataset::new(self.transform(ds.inputs.view())?, ds.targets.clone(), ds.feature_names.clone())
    }
}
