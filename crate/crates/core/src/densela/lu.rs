//! Gaussian elimination with partial pivoting under a simulated precision.

use super::DenseMatrix;
use crate::dispatch_format;
use crate::error::{Error, Result};
use crate::precision::{exact_dot_residual, DoubleDouble, Format, PrecisionContext, Scalar};

/// `PA = LU` with unit-lower `L` and upper `U` packed into one matrix.
///
/// Every stored entry is exactly representable in `format`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    packed: DenseMatrix,
    /// Row `i` of `PA` is row `perm[i]` of `A`.
    pub perm: Vec<usize>,
    pub format: Format,
    /// `max |U_ij| / max |A_ij|`.
    pub growth: f64,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.packed.rows()
    }

    pub fn packed(&self) -> &DenseMatrix {
        &self.packed
    }

    pub fn l(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn u(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| if i <= j { self.packed[(i, j)] } else { 0.0 })
    }

    /// Overwrites `rhs` with `U^{-1} L^{-1} P rhs`, every operation in `T`.
    pub(crate) fn solve_in_place<T: Scalar>(&self, rhs: &mut [T]) -> Result<()> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { what: "lu_solve", expected: n, found: rhs.len() });
        }
        let permuted: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        rhs.copy_from_slice(&permuted);
        let lu = &self.packed;
        // column-oriented forward substitution with unit diagonal
        for j in 0..n {
            let yj = rhs[j];
            if yj == T::zero() {
                continue;
            }
            let col = lu.col(j);
            for i in j + 1..n {
                rhs[i] = rhs[i] - T::from_f64(col[i]) * yj;
            }
        }
        for j in (0..n).rev() {
            let col = lu.col(j);
            let d = T::from_f64(col[j]);
            if d == T::zero() {
                return Err(Error::ZeroDiagonal { index: j });
            }
            let xj = rhs[j] / d;
            rhs[j] = xj;
            if xj == T::zero() {
                continue;
            }
            for i in 0..j {
                rhs[i] = rhs[i] - T::from_f64(col[i]) * xj;
            }
        }
        Ok(())
    }
}

fn factor_generic<T: Scalar>(a: &DenseMatrix) -> Result<(Vec<T>, Vec<usize>)> {
    let n = a.rows();
    let mut w: Vec<T> = a.data().iter().map(|&v| T::from_f64(v)).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = w[k * n + k].abs();
        for i in k + 1..n {
            let v = w[k * n + i].abs();
            // NaN never wins, matching LAPACK's first-maximum rule
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() {
            return Err(Error::ExactZeroPivot { column: k });
        }
        if p != k {
            perm.swap(k, p);
            for j in 0..n {
                w.swap(j * n + k, j * n + p);
            }
        }
        let pivot = w[k * n + k];
        for i in k + 1..n {
            w[k * n + i] = w[k * n + i] / pivot;
        }
        for j in k + 1..n {
            let ukj = w[j * n + k];
            if ukj == T::zero() {
                continue;
            }
            for i in k + 1..n {
                let l = w[k * n + i];
                w[j * n + i] = w[j * n + i] - l * ukj;
            }
        }
    }
    Ok((w, perm))
}

/// GEPP with every elementary operation executed under `ctx`.
///
/// The entries of `a` are rounded into `ctx.format` first; callers that
/// already hold rounded data lose nothing.
pub fn lu_factor(a: &DenseMatrix, ctx: PrecisionContext) -> Result<LuFactors> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let (packed, perm) = dispatch_format!(ctx.format, T => {
        let (w, perm) = factor_generic::<T>(a)?;
        (w.into_iter().map(|v| v.to_f64()).collect::<Vec<f64>>(), perm)
    });
    let packed = DenseMatrix::from_col_major(n, n, packed);
    let amax = a.rounded(ctx.format).max_abs();
    let mut umax: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            umax = umax.max(packed[(i, j)].abs());
        }
    }
    let growth = if amax > 0.0 { umax / amax } else { 1.0 };
    Ok(LuFactors { packed, perm, format: ctx.format, growth })
}

/// Forward and back substitution under `ctx`; the result is rounded into
/// `store`.
pub fn lu_solve(f: &LuFactors, b: &[f64], ctx: PrecisionContext, store: Format) -> Result<Vec<f64>> {
    dispatch_format!(ctx.format, T => {
        let mut w: Vec<T> = b.iter().map(|&v| T::from_f64(v)).collect();
        f.solve_in_place(&mut w)?;
        Ok(w.into_iter().map(|v| store.round(v.to_f64())).collect())
    })
}

/// `w = U^{-1} L^{-1} (A v)` with the product and both solves under
/// `matvec_ctx`, rounded into `store`.
pub fn apply_preconditioned(
    a: &DenseMatrix,
    f: &LuFactors,
    v: &[f64],
    matvec_ctx: PrecisionContext,
    store: Format,
) -> Result<Vec<f64>> {
    if f.dim() != a.rows() || v.len() != a.cols() {
        return Err(Error::DimensionMismatch { what: "apply_preconditioned", expected: a.rows(), found: v.len() });
    }
    dispatch_format!(matvec_ctx.format, T => {
        let mut w = matvec_in::<T>(a, v);
        f.solve_in_place(&mut w)?;
        Ok(w.into_iter().map(|x| store.round(x.to_f64())).collect())
    })
}

/// `A x` accumulated in `T`, column by column.
pub(crate) fn matvec_in<T: Scalar>(a: &DenseMatrix, x: &[f64]) -> Vec<T> {
    let mut y = vec![T::zero(); a.rows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let xj = T::from_f64(xj);
        for (yi, &aij) in y.iter_mut().zip(a.col(j)) {
            *yi = *yi + T::from_f64(aij) * xj;
        }
    }
    y
}

/// `b - A x` accumulated in `ctx` and returned unrounded.
pub fn residual(a: &DenseMatrix, x: &[f64], b: &[f64], ctx: PrecisionContext) -> Vec<DoubleDouble> {
    dispatch_format!(ctx.format, T => {
        let ax = matvec_in::<T>(a, x);
        ax.into_iter().zip(b).map(|(v, &bi)| (T::from_f64(bi) - v).to_dd()).collect()
    })
}

/// High-accuracy solution of `A x = b`: double-double LU followed by
/// refinement with exactly computed residuals. For `cond(A) << 2^106` the
/// result is accurate to roughly double-double precision.
pub fn reference_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<DoubleDouble>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::NotSquare { rows: n, cols: a.cols() });
    }
    let (w, perm) = factor_generic::<DoubleDouble>(a)?;
    let solve = |rhs: &mut Vec<DoubleDouble>| -> Result<()> {
        let permuted: Vec<DoubleDouble> = perm.iter().map(|&p| rhs[p]).collect();
        *rhs = permuted;
        for j in 0..n {
            let yj = rhs[j];
            for i in j + 1..n {
                rhs[i] -= w[j * n + i] * yj;
            }
        }
        for j in (0..n).rev() {
            let d = w[j * n + j];
            if d == DoubleDouble::ZERO {
                return Err(Error::ZeroDiagonal { index: j });
            }
            let xj = rhs[j] / d;
            rhs[j] = xj;
            for i in 0..j {
                rhs[i] -= w[j * n + i] * xj;
            }
        }
        Ok(())
    };
    let mut x: Vec<DoubleDouble> = b.iter().map(|&v| v.into()).collect();
    solve(&mut x)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut last = f64::INFINITY;
    for _ in 0..8 {
        let mut r: Vec<DoubleDouble> = (0..n).map(|i| exact_dot_residual(b[i], &rows[i], &x)).collect();
        solve(&mut r)?;
        let dnorm = r.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()));
        let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()));
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += *di;
        }
        if dnorm <= 1e-33 * xnorm || dnorm >= last {
            break;
        }
        last = dnorm;
    }
    Ok(x)
}
