//! Singular values by one-sided Jacobi rotations.

use super::DenseMatrix;

/// Singular values of `m`, descending. One-sided Jacobi on the columns is
/// slow but accurate in the relative sense even for tiny singular values,
/// which matters for estimating `cond_2` of very ill-conditioned inputs.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let w = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let (rows, cols) = (w.rows(), w.cols());
    let mut a = w.into_data();
    let tol = f64::EPSILON * rows as f64;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (a[p * rows + i], a[q * rows + i]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[p * rows + i], a[q * rows + i]);
                    a[p * rows + i] = c * x - s * y;
                    a[q * rows + i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> =
        (0..cols).map(|j| a[j * rows..(j + 1) * rows].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}
