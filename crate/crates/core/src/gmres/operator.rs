use crate::densela::{matvec_in, DenseMatrix, LuFactors};
use crate::dispatch_format;
use crate::error::{Error, Result};
use crate::precision::{Format, PrecisionContext, Scalar};
use std::cell::Cell;

/// The left-preconditioned operator `U^{-1} L^{-1} A` evaluated in a fixed
/// precision context, with results rounded to the working format.
///
/// Applications are counted in two buckets: Krylov applications (one per
/// Arnoldi step) and auxiliary ones (residual checks, recycle-space
/// construction). Only the former are reported as iterations.
pub struct PrecondOperator<'a> {
    a: &'a DenseMatrix,
    f: &'a LuFactors,
    ctx: PrecisionContext,
    store: Format,
    krylov: Cell<usize>,
    aux: Cell<usize>,
}

impl<'a> PrecondOperator<'a> {
    pub fn new(a: &'a DenseMatrix, f: &'a LuFactors, ctx: PrecisionContext, store: Format) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
        }
        if f.dim() != a.rows() {
            return Err(Error::DimensionMismatch { what: "preconditioner", expected: a.rows(), found: f.dim() });
        }
        Ok(Self { a, f, ctx, store, krylov: Cell::new(0), aux: Cell::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        self.a
    }

    pub fn context(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn store_format(&self) -> Format {
        self.store
    }

    pub fn krylov_applications(&self) -> usize {
        self.krylov.get()
    }

    pub fn auxiliary_applications(&self) -> usize {
        self.aux.get()
    }

    fn raw<T: Scalar>(&self, v: &[T]) -> Result<Vec<T>> {
        let v: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
        let store = self.store;
        dispatch_format!(self.ctx.format, S => {
            let mut w = matvec_in::<S>(self.a, &v);
            self.f.solve_in_place(&mut w)?;
            Ok(w.into_iter().map(|x| T::from_f64(store.round(x.to_f64()))).collect())
        })
    }

    /// `U^{-1} L^{-1} A v`, counted as a Krylov step.
    pub fn apply<T: Scalar>(&self, v: &[T]) -> Result<Vec<T>> {
        self.krylov.set(self.krylov.get() + 1);
        self.raw(v)
    }

    /// Same product, counted as auxiliary work.
    pub fn apply_aux<T: Scalar>(&self, v: &[T]) -> Result<Vec<T>> {
        self.aux.set(self.aux.get() + 1);
        self.raw(v)
    }

    /// `U^{-1} L^{-1} (r - A x)` entirely in the operator context; `x = None`
    /// means a zero iterate and costs no product.
    pub fn precond_residual<T: Scalar>(&self, r: &[f64], x: Option<&[T]>) -> Result<Vec<T>> {
        let store = self.store;
        let xs: Option<Vec<f64>> = x.map(|x| x.iter().map(|v| v.to_f64()).collect());
        if xs.is_some() {
            self.aux.set(self.aux.get() + 1);
        }
        dispatch_format!(self.ctx.format, S => {
            let mut w: Vec<S> = r.iter().map(|&v| S::from_f64(v)).collect();
            if let Some(xs) = &xs {
                let ax = matvec_in::<S>(self.a, xs);
                for (wi, axi) in w.iter_mut().zip(ax) {
                    *wi = *wi - axi;
                }
            }
            self.f.solve_in_place(&mut w)?;
            Ok(w.into_iter().map(|v| T::from_f64(store.round(v.to_f64()))).collect())
        })
    }

    /// Unpreconditioned residual 2-norm `||r - A x||_2` in the operator context.
    pub fn plain_residual_norm<T: Scalar>(&self, r: &[f64], x: &[T]) -> f64 {
        let xs: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        dispatch_format!(self.ctx.format, S => {
            let ax = matvec_in::<S>(self.a, &xs);
            let mut acc = S::zero();
            for (&ri, axi) in r.iter().zip(ax) {
                let d = S::from_f64(ri) - axi;
                acc = acc + d * d;
            }
            acc.sqrt().to_f64()
        })
    }
}
