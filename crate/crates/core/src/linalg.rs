//! Small dense linear-algebra helpers shared by the samplers and solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::GroupedDesign;

/// `y - Xβ`.
pub fn residual(design: &GroupedDesign, beta: &[f64]) -> DVector<f64> {
    let b = DVector::from_column_slice(beta);
    design.y() - design.x() * b
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.unpack())
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let w = l
        .solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal");
    l.tr_solve_lower_triangular(&w)
        .expect("Cholesky factor has a positive diagonal")
}

/// Σ log L_ii, i.e. half the log-determinant of `L Lᵀ`.
pub fn half_log_det(l: &DMatrix<f64>) -> f64 {
    l.diagonal().iter().map(|d| d.ln()).sum()
}

/// Ridge estimate `(XᵀX + I)⁻¹ Xᵀy`.
pub fn ridge_estimate(design: &GroupedDesign, penalty: f64) -> Result<DVector<f64>> {
    let x = design.x();
    let mut a = x.tr_mul(x);
    for i in 0..a.nrows() {
        a[(i, i)] += penalty;
    }
    let l = cholesky_lower(a)?;
    Ok(chol_solve(&l, &x.tr_mul(design.y())))
}

/// Per-group covariate blocks and their Gram matrices.
#[derive(Debug, Clone)]
pub struct GroupBlocks {
    pub columns: Vec<DMatrix<f64>>,
    pub grams: Vec<DMatrix<f64>>,
}

impl GroupBlocks {
    pub fn new(design: &GroupedDesign) -> Self {
        let columns: Vec<DMatrix<f64>> = (0..design.n_groups())
            .map(|g| design.group_columns(g))
            .collect();
        let grams = columns.iter().map(|c| c.tr_mul(c)).collect();
        Self { columns, grams }
    }
}

pub fn sample_variance(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = v.sum() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}
