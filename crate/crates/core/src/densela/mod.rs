//! Dense kernels under simulated precisions: GEPP LU, Householder QR,
//! norms and condition numbers, and a small nonsymmetric eigensolver.

mod eig;
mod lu;
mod matrix;
mod qr;
mod svd;

pub use eig::{eig_generalized, eig_small, EigenPairs};
pub use lu::{apply_preconditioned, lu_factor, lu_solve, reference_solve, residual, LuFactors};
pub(crate) use lu::matvec_in;
pub use matrix::DenseMatrix;
pub use qr::{lstsq_in, qr_reduced, qr_reduced_in};
pub use svd::singular_values;

use crate::error::{Error, Result};
use crate::precision::Format;

/// Maximum absolute row sum.
pub fn inf_norm(m: &DenseMatrix) -> f64 {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Euclidean norm with scaling against overflow.
pub fn two_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Explicit inverse by binary64 GEPP.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let ctx = Format::Double.context();
    let f = lu_factor(a, ctx).map_err(|_| Error::Singular)?;
    let n = a.rows();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(lu_solve(&f, &e, ctx, Format::Double).map_err(|_| Error::Singular)?);
    }
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// `||A||_inf ||A^{-1}||_inf`.
pub fn cond_inf(a: &DenseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    Ok(inf_norm(a) * inf_norm(&inverse(a)?))
}

/// `sigma_max / sigma_min`.
pub fn cond_2(a: &DenseMatrix) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}
