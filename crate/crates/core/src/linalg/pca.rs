//! PCA projection fitting and application.

use crate::error::{Error, Result};
use crate::linalg::eigen::symmetric_eigen;
use crate::linalg::matrix::Matrix;

/// Orthonormal projection onto the top principal directions.
///
/// `a` is m x d with one principal direction per row; `mean` recenters
/// inputs before projecting.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    a: Matrix,
    mean: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn new(a: Matrix, mean: Vec<f64>) -> Result<Self> {
        if a.cols() != mean.len() {
            return Err(Error::Dimension(format!(
                "projection is {}x{} but mean has length {}",
                a.rows(),
                a.cols(),
                mean.len()
            )));
        }
        Ok(Self { a, mean })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// Fits the top-`m` principal directions of `x` (samples by features).
///
/// Uses the d x d covariance when samples >= d, otherwise the Gram
/// matrix of centered samples (same nonzero spectrum, cheaper at high
/// dimension). Directions are sorted by descending eigenvalue and each
/// is sign-fixed so its largest-magnitude entry is positive.
pub fn pca_fit(x: &Matrix, m: usize) -> Result<ProjectionMatrix> {
    let n = x.rows();
    let d = x.cols();
    if n == 0 {
        return Err(Error::Dimension("pca_fit on empty matrix".into()));
    }
    if m < 1 || m > n.min(d) {
        return Err(Error::Dimension(format!(
            "pca components m={m} out of range 1..={}",
            n.min(d)
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|c| (0..n).map(|r| x.get(r, c)).sum::<f64>() / n as f64)
        .collect();
    let mut centered = x.clone();
    for r in 0..n {
        let row = centered.row_mut(r);
        for (v, mu) in row.iter_mut().zip(&mean) {
            *v -= mu;
        }
    }

    let mut a = Matrix::zeros(m, d);
    if n >= d {
        // covariance route: C = Xc^T Xc / n
        let mut cov = Matrix::zeros(d, d);
        for r in 0..n {
            let row = centered.row(r);
            for i in 0..d {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                let cov_row = cov.row_mut(i);
                for (j, &xj) in row.iter().enumerate() {
                    cov_row[j] += xi * xj;
                }
            }
        }
        for v in cov.data_mut() {
            *v /= n as f64;
        }
        let (_, vectors) = symmetric_eigen(&cov)?;
        for i in 0..m {
            a.row_mut(i).copy_from_slice(vectors.row(i));
        }
    } else {
        // Gram route: G = Xc Xc^T / n shares the covariance spectrum;
        // direction i = Xc^T u_i normalized.
        let gram = centered.matmul(&centered.transpose())?;
        let mut gram = gram;
        for v in gram.data_mut() {
            *v /= n as f64;
        }
        let (values, vectors) = symmetric_eigen(&gram)?;
        let scale = values[0].abs().max(f64::MIN_POSITIVE);
        for i in 0..m {
            if values[i] <= 1e-12 * scale {
                return Err(Error::Numeric(format!(
                    "data rank {} is below the requested {m} components",
                    i
                )));
            }
            let dir = centered.matvec_t(vectors.row(i))?;
            let norm = crate::linalg::matrix::norm2(&dir);
            for (out, v) in a.row_mut(i).iter_mut().zip(&dir) {
                *out = v / norm;
            }
        }
    }

    // sign convention: largest-magnitude entry of each direction positive
    for i in 0..m {
        let row = a.row_mut(i);
        let mut best = 0usize;
        for (k, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = k;
            }
        }
        if row[best] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
    ProjectionMatrix::new(a, mean)
}

/// Projects a single vector: `A (s - mean)`.
pub fn pca_apply(p: &ProjectionMatrix, s: &[f64]) -> Result<Vec<f64>> {
    if s.len() != p.d() {
        return Err(Error::Dimension(format!(
            "pca_apply expects length {}, got {}",
            p.d(),
            s.len()
        )));
    }
    let centered: Vec<f64> = s.iter().zip(p.mean()).map(|(v, mu)| v - mu).collect();
    p.matrix().matvec(&centered)
}

/// Projects every row of `x`.
pub fn pca_apply_batch(p: &ProjectionMatrix, x: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.rows(), p.m());
    for r in 0..x.rows() {
        let y = pca_apply(p, x.row(r))?;
        out.row_mut(r).copy_from_slice(&y);
    }
    Ok(out)
}

/// Maps a projected vector back to feature space: `A^T y + mean`.
pub fn pca_reconstruct(p: &ProjectionMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != p.m() {
        return Err(Error::Dimension(format!(
            "pca_reconstruct expects length {}, got {}",
            p.m(),
            y.len()
        )));
    }
    let mut s = p.matrix().matvec_t(y)?;
    for (v, mu) in s.iter_mut().zip(p.mean()) {
        *v += mu;
    }
    Ok(s)
}
