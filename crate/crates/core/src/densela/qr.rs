//! Householder QR and least squares under a simulated working precision.

use super::DenseMatrix;
use crate::dispatch_format;
use crate::error::{Error, Result};
use crate::precision::{Format, Scalar};

struct Householder<T> {
    rows: usize,
    cols: usize,
    /// Reduced matrix; its upper triangle is R.
    w: Vec<T>,
    /// Reflector vectors, `vs[k]` acting on rows `k..rows`.
    vs: Vec<Vec<T>>,
    /// `v^T v` for each reflector (zero means identity).
    vnorms: Vec<T>,
}

impl<T: Scalar> Householder<T> {
    fn factor(m: &DenseMatrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        let mut w: Vec<T> = m.data().iter().map(|&v| T::from_f64(v)).collect();
        let mut vs = Vec::with_capacity(cols);
        let mut vnorms = Vec::with_capacity(cols);
        for k in 0..cols.min(rows) {
            let mut sq = T::zero();
            for i in k..rows {
                let x = w[k * rows + i];
                sq = sq + x * x;
            }
            let norm = sq.sqrt();
            let mut v: Vec<T> = (k..rows).map(|i| w[k * rows + i]).collect();
            if norm == T::zero() {
                vs.push(v);
                vnorms.push(T::zero());
                continue;
            }
            let alpha = if v[0] > T::zero() { -norm } else { norm };
            v[0] = v[0] - alpha;
            let mut vtv = T::zero();
            for &x in &v {
                vtv = vtv + x * x;
            }
            w[k * rows + k] = alpha;
            for i in k + 1..rows {
                w[k * rows + i] = T::zero();
            }
            let two = T::from_f64(2.0);
            for j in k + 1..cols {
                let col = &mut w[j * rows..(j + 1) * rows];
                reflect(&v, vtv, two, &mut col[k..]);
            }
            vs.push(v);
            vnorms.push(vtv);
        }
        Self { rows, cols, w, vs, vnorms }
    }

    fn apply_qt(&self, x: &mut [T]) {
        let two = T::from_f64(2.0);
        for (k, (v, &vtv)) in self.vs.iter().zip(&self.vnorms).enumerate() {
            if vtv != T::zero() {
                reflect(v, vtv, two, &mut x[k..]);
            }
        }
    }

    fn apply_q(&self, x: &mut [T]) {
        let two = T::from_f64(2.0);
        for (k, (v, &vtv)) in self.vs.iter().zip(&self.vnorms).enumerate().rev() {
            if vtv != T::zero() {
                reflect(v, vtv, two, &mut x[k..]);
            }
        }
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> T {
        self.w[j * self.rows + i]
    }
}

#[inline]
fn reflect<T: Scalar>(v: &[T], vtv: T, two: T, x: &mut [T]) {
    let mut d = T::zero();
    for (a, b) in v.iter().zip(x.iter()) {
        d = d + *a * *b;
    }
    if d == T::zero() {
        return;
    }
    let f = two * d / vtv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi = *xi - f * *vi;
    }
}

fn qr_generic<T: Scalar>(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (rows, cols) = (m.rows(), m.cols());
    let h = Householder::<T>::factor(m);
    let tol = rows.max(cols) as f64 * T::FORMAT.unit_roundoff() * m.frobenius_norm();
    let mut q = DenseMatrix::zeros(rows, cols);
    let mut r = DenseMatrix::zeros(cols, cols);
    for j in 0..cols {
        let mut e = vec![T::zero(); rows];
        e[j] = T::one();
        h.apply_q(&mut e);
        let flip = h.r(j, j) < T::zero();
        for (dst, v) in q.col_mut(j).iter_mut().zip(&e) {
            *dst = if flip { -v.to_f64() } else { v.to_f64() };
        }
        for i in 0..=j {
            let v = h.r(i, j).to_f64();
            r[(i, j)] = v;
        }
    }
    for i in 0..cols {
        if h.r(i, i) < T::zero() {
            for j in i..cols {
                r[(i, j)] = -r[(i, j)];
            }
        }
        if !(r[(i, i)] > tol) {
            return Err(Error::RankDeficient { column: i });
        }
    }
    Ok((q, r))
}

/// Reduced Householder QR, `M = QR` with `Q` of size rows x cols and `R`
/// upper triangular with positive diagonal, computed in `work`.
pub fn qr_reduced_in(m: &DenseMatrix, work: Format) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.rows() < m.cols() {
        return Err(Error::InvalidConfig(format!(
            "qr_reduced needs rows >= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    dispatch_format!(work, T => qr_generic::<T>(m))
}

/// Reduced QR in binary64.
pub fn qr_reduced(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    qr_reduced_in(m, Format::Double)
}

fn lstsq_generic<T: Scalar>(g: &DenseMatrix, c: &[f64]) -> Result<Vec<f64>> {
    let h = Householder::<T>::factor(g);
    let mut rhs: Vec<T> = c.iter().map(|&v| T::from_f64(v)).collect();
    h.apply_qt(&mut rhs);
    let n = h.cols;
    let mut y = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s = s - h.r(i, j) * y[j];
        }
        let d = h.r(i, i);
        if d == T::zero() {
            return Err(Error::RankDeficient { column: i });
        }
        y[i] = s / d;
    }
    Ok(y.into_iter().map(|v| v.to_f64()).collect())
}

/// Minimiser of `||c - G y||_2` for a full-column-rank `G` via Householder QR
/// in `work`.
pub fn lstsq_in(g: &DenseMatrix, c: &[f64], work: Format) -> Result<Vec<f64>> {
    if c.len() != g.rows() {
        return Err(Error::DimensionMismatch { what: "lstsq", expected: g.rows(), found: c.len() });
    }
    if g.rows() < g.cols() {
        return Err(Error::InvalidConfig("lstsq needs rows >= cols".into()));
    }
    dispatch_format!(work, T => lstsq_generic::<T>(g, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_qr() {
        let (q, r) = qr_reduced(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(q, DenseMatrix::identity(3));
        assert_eq!(r, DenseMatrix::identity(3));
    }

    #[test]
    fn three_four_five() {
        let m = DenseMatrix::from_rows(&[&[3.0], &[4.0]]);
        let (q, r) = qr_reduced(&m).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficiency_detected() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        assert!(matches!(qr_reduced(&m), Err(Error::RankDeficient { column: 1 })));
        assert!(qr_reduced(&DenseMatrix::zeros(3, 3).take_cols(1)).is_err());
        assert!(qr_reduced(&DenseMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn least_squares_fits_line() {
        // y = 1 + 2t sampled exactly
        let g = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]]);
        let c = [1.0, 3.0, 5.0, 7.0];
        for f in [Format::Single, Format::Double, Format::Quad] {
            let y = lstsq_in(&g, &c, f).unwrap();
            assert!((y[0] - 1.0).abs() < 1e-5 && (y[1] - 2.0).abs() < 1e-5, "{f}: {y:?}");
        }
    }
}
