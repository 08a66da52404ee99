//! Dense matrix and vector kernels: standardization, PCA, ridge
//! denoising, and column normalization. Everything is pure f64 over
//! immutable inputs, so values share freely across threads.

pub mod eigen;
pub mod matrix;
pub mod pca;
pub mod ridge;

pub use matrix::{dot, norm2, Cholesky, Matrix};
pub use pca::{pca_apply, pca_apply_batch, pca_fit, pca_reconstruct, ProjectionMatrix};
pub use ridge::{ridge_denoiser, ridge_denoiser_form, RidgeForm};

use crate::error::{Error, Result};

/// Per-feature affine normalizer fitted to a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Dimension(
                "standardizer mean/std length mismatch".into(),
            ));
        }
        if std.iter().any(|s| *s <= 0.0) {
            return Err(Error::Parameter(
                "standardizer std entries must be strictly positive".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply_row(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardizer expects length {}, got {}",
                self.mean.len(),
                s.len()
            )));
        }
        Ok(s.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, sd))| (v - mu) / sd)
            .collect())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = self.apply_row(x.row(r))?;
            out.row_mut(r).copy_from_slice(&row);
        }
        Ok(out)
    }
}

/// Fits per-column mean and population (1/N) standard deviation.
///
/// Zero-variance columns get std 1 so constant features pass through
/// centered instead of dividing by zero.
pub fn standardize_fit(x: &Matrix) -> Result<Standardizer> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Dimension("standardize_fit on empty matrix".into()));
    }
    let d = x.cols();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for r in 0..n {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(x.row(r)) {
            let dlt = x - m;
            *v += dlt * dlt;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Standardizer::new(mean, std)
}

/// Rescales every column of `m` to unit Euclidean norm.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut norms = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (nrm, v) in norms.iter_mut().zip(m.row(r)) {
            *nrm += v * v;
        }
    }
    for (c, nrm) in norms.iter_mut().enumerate() {
        if *nrm == 0.0 {
            return Err(Error::Data(format!(
                "cannot normalize all-zero column {c}"
            )));
        }
        *nrm = nrm.sqrt();
    }
    let mut out = m.clone();
    for r in 0..out.rows() {
        for (v, nrm) in out.row_mut(r).iter_mut().zip(&norms) {
            *v /= nrm;
        }
    }
    Ok(out)
}
