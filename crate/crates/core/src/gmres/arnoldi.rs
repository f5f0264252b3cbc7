use super::kernels::{axmy, dot, givens, nrm2, scale};
use super::PrecondOperator;
use crate::densela::DenseMatrix;
use crate::error::Result;
use crate::precision::Scalar;

/// Incremental (optionally deflated) Arnoldi process with Givens-updated
/// least squares, all in the working scalar type `T`.
///
/// With a deflation block `C` the process runs on `(I - C C^T) A`; the
/// projections onto `C` go into `B`.
pub(crate) struct Arnoldi<'o, 'a, T> {
    op: &'o PrecondOperator<'a>,
    c: &'o [Vec<T>],
    reorth: bool,
    sqrt_u: f64,
    c_tol: f64,
    pub v: Vec<Vec<T>>,
    /// Columns of `H̄`; column `j` has `j + 2` entries.
    pub h: Vec<Vec<T>>,
    /// Columns of `B`, `k` entries each.
    pub b: Vec<Vec<T>>,
    /// Rotated copy of `H̄` (upper triangular part used for `y`).
    rot: Vec<Vec<T>>,
    cs: Vec<(T, T)>,
    g: Vec<T>,
    pub happy: bool,
}

impl<'o, 'a, T: Scalar> Arnoldi<'o, 'a, T> {
    /// `start` must be the unnormalised starting residual with norm `beta`.
    pub fn new(op: &'o PrecondOperator<'a>, start: &[T], beta: T, c: &'o [Vec<T>], reorth: bool) -> Self {
        Self {
            op,
            c,
            reorth,
            sqrt_u: T::FORMAT.unit_roundoff().sqrt(),
            c_tol: 10.0 * T::FORMAT.unit_roundoff(),
            v: vec![scale(start, beta)],
            h: Vec::new(),
            b: Vec::new(),
            rot: Vec::new(),
            cs: Vec::new(),
            g: vec![beta],
            happy: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.h.len()
    }

    /// Current least-squares residual estimate `|g_{j+1}|`.
    pub fn estimate(&self) -> T {
        self.g[self.steps()].abs()
    }

    fn orthogonalise(&self, w: &mut [T], hcol: &mut [T], bcol: &mut [T]) {
        for (ci, bi) in self.c.iter().zip(bcol.iter_mut()) {
            let p = dot(ci, w);
            *bi = *bi + p;
            axmy(p, ci, w);
        }
        for (vi, hi) in self.v.iter().zip(hcol.iter_mut()) {
            let p = dot(vi, w);
            *hi = *hi + p;
            axmy(p, vi, w);
        }
    }

    /// One Arnoldi step; returns the new estimate.
    pub fn step(&mut self) -> Result<T> {
        let j = self.steps();
        let mut w = self.op.apply(&self.v[j])?;
        let mut hcol = vec![T::zero(); j + 2];
        let mut bcol = vec![T::zero(); self.c.len()];
        self.orthogonalise(&mut w, &mut hcol[..j + 1], &mut bcol);
        let mut hn = nrm2(&w);
        if self.reorth && hn != T::zero() {
            let worst = |qs: &[Vec<T>]| qs.iter().map(|q| dot(q, &w).abs().to_f64()).fold(0.0, f64::max);
            // The recycle block is held to a much tighter standard than the
            // Krylov block: components along C are amplified from step to
            // step by the deflated operator.
            let hn64 = hn.to_f64();
            if worst(&self.v) > self.sqrt_u * hn64 || worst(self.c) > self.c_tol * hn64 {
                self.orthogonalise(&mut w, &mut hcol[..j + 1], &mut bcol);
                hn = nrm2(&w);
            }
        }
        hcol[j + 1] = hn;
        if hn == T::zero() || !hn.is_finite() {
            self.happy = hn == T::zero();
            self.v.push(vec![T::zero(); w.len()]);
        } else {
            self.v.push(scale(&w, hn));
        }
        self.h.push(hcol.clone());
        self.b.push(bcol);

        let mut r = hcol;
        for (i, &(c, s)) in self.cs.iter().enumerate() {
            let t = c * r[i] + s * r[i + 1];
            r[i + 1] = -s * r[i] + c * r[i + 1];
            r[i] = t;
        }
        let (c, s) = givens(r[j], r[j + 1]);
        self.cs.push((c, s));
        r[j] = c * r[j] + s * r[j + 1];
        r[j + 1] = T::zero();
        self.rot.push(r);
        let gj = self.g[j];
        self.g[j] = c * gj;
        self.g.push(-s * gj);
        Ok(self.estimate())
    }

    /// Coefficients `y` minimising `||beta e1 - H̄ y||` over the current steps.
    pub fn coefficients(&self) -> Vec<T> {
        let n = self.steps();
        let mut y = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = self.g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s = s - self.rot[jj][i] * *yj;
            }
            let d = self.rot[i][i];
            y[i] = if d == T::zero() { T::zero() } else { s / d };
        }
        y
    }

    /// `sum_j y_j v_j` over the first `y.len()` basis vectors.
    pub fn combine(&self, y: &[T]) -> Vec<T> {
        let n = self.v[0].len();
        let mut out = vec![T::zero(); n];
        for (yj, vj) in y.iter().zip(&self.v) {
            for (o, v) in out.iter_mut().zip(vj) {
                *o = *o + *yj * *v;
            }
        }
        out
    }

    pub fn basis_matrix(&self) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = self.v.iter().map(|v| v.iter().map(|x| x.to_f64()).collect()).collect();
        DenseMatrix::from_columns(self.op.dim(), &cols)
    }

    /// `H̄` as a `(j+1) x j` matrix.
    pub fn hessenberg(&self) -> DenseMatrix {
        let j = self.steps();
        DenseMatrix::from_fn(j + 1, j, |r, c| if r < self.h[c].len() { self.h[c][r].to_f64() } else { 0.0 })
    }

    /// `B` as a `k x j` matrix.
    pub fn b_matrix(&self) -> DenseMatrix {
        let j = self.steps();
        DenseMatrix::from_fn(self.c.len(), j, |r, c| self.b[c][r].to_f64())
    }
}
