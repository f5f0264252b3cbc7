use crate::densela::{residual, vec_inf_norm, DenseMatrix};
use crate::precision::{DoubleDouble, PrecisionContext};

/// Error measures of an iterate against the system and a reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMeasures {
    /// `||x - x_ref||_inf / ||x_ref||_inf`
    pub ferr: f64,
    /// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`
    pub nbe: f64,
    /// `max_i |b - A x|_i / (|A||x| + |b|)_i`
    pub cbe: f64,
}

pub(crate) struct Metrics<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    a_inf: f64,
    b_inf: f64,
    abs_a: DenseMatrix,
    x_ref: Option<&'a [DoubleDouble]>,
    x_ref_inf: f64,
    ur: PrecisionContext,
}

impl<'a> Metrics<'a> {
    pub fn new(a: &'a DenseMatrix, b: &'a [f64], x_ref: Option<&'a [DoubleDouble]>, ur: PrecisionContext) -> Self {
        let abs_a = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)].abs());
        let x_ref_inf = x_ref.map_or(0.0, |x| x.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs())));
        Self { a, b, a_inf: crate::densela::inf_norm(a), b_inf: vec_inf_norm(b), abs_a, x_ref, x_ref_inf, ur }
    }

    /// Residual `b - A x` in the residual precision.
    pub fn residual(&self, x: &[f64]) -> Vec<DoubleDouble> {
        residual(self.a, x, self.b, self.ur)
    }

    pub fn measure(&self, x: &[f64], r: &[DoubleDouble]) -> ErrorMeasures {
        if x.iter().any(|v| !v.is_finite()) {
            let inf = f64::INFINITY;
            return ErrorMeasures { ferr: if self.x_ref.is_some() { inf } else { f64::NAN }, nbe: inf, cbe: inf };
        }
        let rinf = r.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()));
        let nbe = rinf / (self.a_inf * vec_inf_norm(x) + self.b_inf);
        let ax = self.abs_a.matvec(&x.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let cbe = r
            .iter()
            .zip(ax.iter().zip(self.b))
            .map(|(ri, (axi, bi))| {
                let den = axi + bi.abs();
                let num = ri.to_f64().abs();
                if den == 0.0 {
                    if num == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    num / den
                }
            })
            .fold(0.0, f64::max);
        let ferr = match self.x_ref {
            Some(xr) => {
                let diff = x
                    .iter()
                    .zip(xr)
                    .fold(0.0f64, |m, (xi, ri)| m.max((DoubleDouble::from(*xi) - *ri).abs().to_f64()));
                if self.x_ref_inf > 0.0 { diff / self.x_ref_inf } else { diff }
            }
            None => f64::NAN,
        };
        let fix = |v: f64| if v.is_nan() && self.x_ref.is_some() { f64::INFINITY } else { v };
        ErrorMeasures { ferr: fix(ferr), nbe: if nbe.is_nan() { f64::INFINITY } else { nbe }, cbe: if cbe.is_nan() { f64::INFINITY } else { cbe } }
    }
}
