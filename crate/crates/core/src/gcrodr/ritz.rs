//! Harmonic Ritz extraction for the recycle space.

use crate::densela::{eig_generalized, eig_small, lu_factor, lu_solve, two_norm, DenseMatrix, EigenPairs};
use crate::error::{Error, Result};
use crate::precision::Format;

/// Real basis of the `k` harmonic Ritz vectors of smallest magnitude,
/// keeping conjugate pairs whole when at most `max_cols` columns allow it.
fn select(pairs: &EigenPairs, k: usize, max_cols: usize) -> DenseMatrix {
    pairs.real_basis(k, max_cols)
}

/// Harmonic Ritz vectors from the first cycle: eigenvectors of
/// `H + h^2 H^{-T} e_m e_m^T`. Returns `(P_k, Y_k = V_m P_k)` and whether
/// the singular-`H` fallback (plain Ritz vectors) was taken.
pub fn harmonic_ritz_first(
    h: &DenseMatrix,
    h_sub: f64,
    v: &DenseMatrix,
    k: usize,
    max_cols: usize,
) -> Result<(DenseMatrix, DenseMatrix, bool)> {
    let m = h.rows();
    if !h.is_square() || v.cols() < m {
        return Err(Error::DimensionMismatch { what: "harmonic_ritz_first", expected: m, found: v.cols() });
    }
    let ctx = Format::Double.context();
    let mut modified = h.clone();
    let mut fallback = false;
    if h_sub != 0.0 {
        let mut em = vec![0.0; m];
        em[m - 1] = 1.0;
        let solved = lu_factor(&h.transpose(), ctx).and_then(|f| lu_solve(&f, &em, ctx, Format::Double));
        match solved {
            Ok(w) if w.iter().all(|x| x.is_finite()) => {
                let h2 = h_sub * h_sub;
                for (i, wi) in w.iter().enumerate() {
                    modified[(i, m - 1)] += h2 * wi;
                }
            }
            _ => fallback = true,
        }
    }
    let pairs = eig_small(&modified)?;
    let p = select(&pairs, k, max_cols);
    let y = v.take_cols(m).matmul(&p);
    Ok((p, y, fallback))
}

/// Harmonic Ritz vectors from the generalised problem
/// `G^T G z = theta G^T W^T V z`, returning `P_k`.
///
/// A numerically singular right-hand matrix is retried once with its
/// diagonal shifted by `sqrt(u) ||B||`.
pub fn harmonic_ritz_recycle(
    g: &DenseMatrix,
    w: &DenseMatrix,
    v: &DenseMatrix,
    k: usize,
    max_cols: usize,
) -> Result<DenseMatrix> {
    let wtv = w.t_matmul(v);
    harmonic_ritz_recycle_from_wtv(g, &wtv, k, max_cols)
}

pub(crate) fn harmonic_ritz_recycle_from_wtv(
    g: &DenseMatrix,
    wtv: &DenseMatrix,
    k: usize,
    max_cols: usize,
) -> Result<DenseMatrix> {
    let a = g.t_matmul(g);
    let mut b = g.t_matmul(wtv);
    let pairs = match eig_generalized(&a, &b) {
        Ok(p) => p,
        Err(Error::SingularB) => {
            let shift = Format::Double.unit_roundoff().sqrt() * two_norm(b.data());
            for i in 0..b.rows() {
                b[(i, i)] += shift;
            }
            eig_generalized(&a, &b)?
        }
        Err(e) => return Err(e),
    };
    Ok(select(&pairs, k, max_cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unmodified_diagonal() {
        let h = DenseMatrix::from_diag(&[1.0, 2.0, 3.0]);
        let (p, y, fb) = harmonic_ritz_first(&h, 0.0, &DenseMatrix::identity(3), 2, 3).unwrap();
        assert!(!fb);
        assert_eq!(p.cols(), 2);
        assert!((p[(0, 0)].abs() - 1.0).abs() < 1e-15 && (p[(1, 1)].abs() - 1.0).abs() < 1e-15);
        assert_eq!(y, p);
    }

    #[test]
    fn rank_one_correction_matches_closed_form() {
        // H = diag(2,4), h_sub = 1: H^{-T} e2 = (0, 1/4), modified = [[2,0],[0,4.25]]
        let h = DenseMatrix::from_diag(&[2.0, 4.0]);
        let (p, _, _) = harmonic_ritz_first(&h, 1.0, &DenseMatrix::identity(2), 1, 1).unwrap();
        assert!((p[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let (p, _, _) = harmonic_ritz_first(&DenseMatrix::from_diag(&[5.0, 4.0]), 1.0, &DenseMatrix::identity(2), 1, 1)
            .unwrap();
        // values 5 and 4.25: the second coordinate is smallest
        assert!((p[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recycle_decoupled_problem() {
        let g = DenseMatrix::from_diag(&[3.0, 1.0, 2.0]);
        let i3 = DenseMatrix::identity(3);
        let p = harmonic_ritz_recycle(&g, &i3, &i3, 1, 1).unwrap();
        assert!((p[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }
}
