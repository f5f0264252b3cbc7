//! Test-problem generators and Matrix Market I/O.

mod mtx;

pub use mtx::{read_matrix_market, read_matrix_market_str, write_matrix_market};

use crate::densela::{qr_reduced, DenseMatrix};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Random matrix with geometrically distributed singular values
/// `sigma_i = kappa2^(-(i-1)/(n-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandSvdSpec {
    pub n: usize,
    pub kappa2: f64,
    pub seed: u64,
}

/// Symmetric Toeplitz prolate matrix of order `n` with parameter `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProlateSpec {
    pub n: usize,
    pub alpha: f64,
}

pub fn randsvd_singular_values(n: usize, kappa2: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| kappa2.powf(-(i as f64) / (n - 1) as f64)).collect()
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R made positive.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    let data: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    let (q, _) = qr_reduced(&DenseMatrix::from_col_major(n, n, data))?;
    Ok(q)
}

pub fn gen_randsvd(spec: &RandSvdSpec) -> Result<DenseMatrix> {
    if spec.n < 2 || !(spec.kappa2 >= 1.0) {
        return Err(Error::InvalidConfig(format!("randsvd needs n >= 2 and kappa2 >= 1, got {spec:?}")));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = random_orthogonal(n, &mut rng)?;
    let q = random_orthogonal(n, &mut rng)?;
    let sigma = randsvd_singular_values(n, spec.kappa2);
    let mut ps = p;
    for (j, s) in sigma.iter().enumerate() {
        for v in ps.col_mut(j) {
            *v *= s;
        }
    }
    Ok(ps.matmul(&q.transpose()))
}

pub fn gen_prolate(spec: &ProlateSpec) -> Result<DenseMatrix> {
    if spec.n == 0 || !(spec.alpha > 0.0 && spec.alpha < 0.5) {
        return Err(Error::InvalidConfig(format!("prolate needs n >= 1 and 0 < alpha < 0.5, got {spec:?}")));
    }
    let symbol: Vec<f64> = (0..spec.n)
        .map(|d| {
            if d == 0 {
                2.0 * spec.alpha
            } else {
                let d = d as f64;
                (2.0 * PI * spec.alpha * d).sin() / (PI * d)
            }
        })
        .collect();
    Ok(DenseMatrix::from_fn(spec.n, spec.n, |i, j| symbol[i.abs_diff(j)]))
}

pub fn rhs_ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// Two-sided diagonal equilibration `R A C` with `R = diag(1/max_j |a_ij|)`
/// followed by column scaling of the row-scaled matrix. Scale factors are
/// rounded to powers of two so the scaling itself is exact in every format.
#[derive(Debug, Clone)]
pub struct Equilibration {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

impl Equilibration {
    pub fn compute(a: &DenseMatrix) -> Self {
        let pow2 = |v: f64| if v > 0.0 && v.is_finite() { 2f64.powi(-(v.log2().round() as i32)) } else { 1.0 };
        let row: Vec<f64> = (0..a.rows()).map(|i| pow2(a.row(i).iter().fold(0.0, |m: f64, x| m.max(x.abs())))).collect();
        let col: Vec<f64> = (0..a.cols())
            .map(|j| pow2(a.col(j).iter().zip(&row).fold(0.0, |m: f64, (x, r)| m.max((x * r).abs()))))
            .collect();
        Self { row, col }
    }

    pub fn apply(&self, a: &DenseMatrix, b: &[f64]) -> (DenseMatrix, Vec<f64>) {
        let scaled = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| self.row[i] * a[(i, j)] * self.col[j]);
        (scaled, b.iter().zip(&self.row).map(|(x, r)| x * r).collect())
    }

    /// Maps a solution of the scaled system back to the original unknowns.
    pub fn unscale_solution(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.col).map(|(y, c)| y * c).collect()
    }
}
