//! Regularized least-squares denoiser.

use crate::error::{Error, Result};
use crate::linalg::matrix::{Cholesky, Matrix};

/// Which algebraic route computes the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeForm {
    /// `(D^T D + lambda I)^-1 D^T` — an n x n solve.
    Primal,
    /// `D^T (D D^T + lambda I)^-1` — an m x m solve; identical by the
    /// push-through identity and the only viable route when n >> m with
    /// a tiny lambda.
    Dual,
}

/// Ridge denoiser `B` (n x m) for a dictionary `D` (m x n).
///
/// Picks the dual form when n > m, the primal form otherwise.
pub fn ridge_denoiser(d: &Matrix, lambda: f64) -> Result<Matrix> {
    let form = if d.cols() > d.rows() {
        RidgeForm::Dual
    } else {
        RidgeForm::Primal
    };
    ridge_denoiser_form(d, lambda, form)
}

/// Ridge denoiser via an explicit route; both routes agree entrywise.
pub fn ridge_denoiser_form(d: &Matrix, lambda: f64, form: RidgeForm) -> Result<Matrix> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    if d.rows() == 0 || d.cols() == 0 {
        return Err(Error::Dimension("ridge on an empty dictionary".into()));
    }
    match form {
        RidgeForm::Primal => {
            let dt = d.transpose();
            let mut gram = dt.matmul(d)?; // n x n
            let n = gram.rows();
            for i in 0..n {
                let v = gram.get(i, i) + lambda;
                gram.set(i, i, v);
            }
            let ch = Cholesky::factor(&gram)
                .map_err(|e| Error::Numeric(format!("primal ridge system singular: {e}")))?;
            ch.solve_matrix(&dt)
        }
        RidgeForm::Dual => {
            let mut gram = d.matmul(&d.transpose())?; // m x m
            let m = gram.rows();
            for i in 0..m {
                let v = gram.get(i, i) + lambda;
                gram.set(i, i, v);
            }
            let ch = Cholesky::factor(&gram)
                .map_err(|e| Error::Numeric(format!("dual ridge system singular: {e}")))?;
            // B = D^T (DD^T + lambda I)^-1 = (G^-1 D)^T since G is symmetric
            let y = ch.solve_matrix(d)?; // m x n
            Ok(y.transpose())
        }
    }
}
