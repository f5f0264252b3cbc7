#![allow(dead_code)]

use mpir::densela::{apply_preconditioned, lu_factor, singular_values, DenseMatrix, LuFactors};
use mpir::gcrodr::{gcrodr_solve, CycleTrace, GcrodrConfig, GcrodrOutcome};
use mpir::matgen::{gen_randsvd, RandSvdSpec};
use mpir::precision::Format;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense random matrix with a dominant diagonal, so `kappa` stays small.
pub fn well_conditioned(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(n, n, |i, j| {
        let v: f64 = rng.random_range(-1.0..1.0);
        if i == j {
            v + 2.0 * n as f64
        } else {
            v
        }
    })
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn randsvd(n: usize, kappa2: f64, seed: u64) -> DenseMatrix {
    gen_randsvd(&RandSvdSpec { n, kappa2, seed }).unwrap()
}

/// Measured recycle-space defects after one cycle.
#[derive(Debug, Clone, Copy)]
pub struct Defects {
    /// `||Ã U - C|| / (||Ã|| ||U||)`.
    pub image: f64,
    /// `||C^T C - I||`.
    pub orth: f64,
}

fn spectral_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `Ã = U^{-1} L^{-1} A` column by column, each evaluated in quad.
pub fn explicit_operator(a: &DenseMatrix, f: &LuFactors) -> DenseMatrix {
    let n = a.rows();
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(apply_preconditioned(a, f, &e, Format::Quad.context(), Format::Double).unwrap());
        e[j] = 0.0;
    }
    DenseMatrix::from_columns(n, &cols)
}

pub fn defects(at: &DenseMatrix, uk: &DenseMatrix, ck: &DenseMatrix) -> Defects {
    let image = spectral_norm(&at.matmul(uk).sub(ck)) / (spectral_norm(at) * spectral_norm(uk));
    let k = ck.cols();
    let orth = spectral_norm(&ck.t_matmul(ck).sub(&DenseMatrix::identity(k)));
    Defects { image, orth }
}

/// One refinement-like sequence of GCRO-DR solves on the same operator:
/// every solve after the first starts from the recycle space of the previous.
pub struct RecycledRun {
    pub factors: LuFactors,
    pub solves: Vec<GcrodrOutcome>,
}

pub fn recycled_run(a: &DenseMatrix, uf: Format, cfg: &GcrodrConfig, rhs: &[Vec<f64>]) -> RecycledRun {
    let factors = lu_factor(a, uf.context()).unwrap();
    let mut solves: Vec<GcrodrOutcome> = Vec::new();
    for r in rhs {
        let prev = solves.last().and_then(|s| s.recycle.clone());
        solves.push(gcrodr_solve(a, &factors, r, cfg, prev.as_ref()).unwrap());
    }
    RecycledRun { factors, solves }
}

/// Cycles that end with an updated recycle pair.
pub fn traced_pairs(run: &RecycledRun) -> impl Iterator<Item = &CycleTrace> {
    run.solves.iter().flat_map(|s| &s.trace).filter(|t| t.uk.is_some() && t.ck.is_some())
}

// ---- kernel checks shared by the property suites and the acceptance run ----

use mpir::densela::{eig_small, inf_norm};
use mpir::precision::round_scalar;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

pub fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Worst `||PA - LU||_inf / (n u_f rho ||A||_inf)` over the given seeds, and
/// the largest multiplier seen.
pub fn lu_backward_ratio(fmt: Format, n: usize, seeds: std::ops::Range<u64>) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut max_mult: f64 = 0.0;
    for seed in seeds {
        let a = random_matrix(n, seed);
        let f = lu_factor(&a, fmt.context()).unwrap();
        let (l, u) = (f.l(), f.u());
        let defect = inf_norm(&a.permute_rows(&f.perm).sub(&l.matmul(&u)));
        let scale = n as f64 * fmt.unit_roundoff() * f.growth.max(1.0) * inf_norm(&a);
        worst = worst.max(defect / scale);
        for j in 0..n {
            for i in j + 1..n {
                max_mult = max_mult.max(l[(i, j)].abs());
            }
        }
    }
    (worst, max_mult)
}

/// Worst `||M z - theta z|| / (u ||M||)` over random dense matrices.
pub fn eig_residual_ratio(n: usize, seeds: std::ops::Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let m = random_matrix(n, seed);
        let pairs = eig_small(&m).unwrap();
        let norm = singular_values(&m)[0];
        for (theta, z) in pairs.values.iter().zip(&pairs.vectors) {
            let mut res: f64 = 0.0;
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += m[(i, j)] * z[j];
                }
                res += (acc - theta * z[i]).norm_sqr();
            }
            worst = worst.max(res.sqrt() / (Format::Double.unit_roundoff() * norm));
        }
    }
    worst
}

/// Characteristic polynomial coefficients `c_0..c_n` (monic, `c_n = 1`) by
/// Faddeev-LeVerrier in exact rational arithmetic.
pub fn charpoly_exact(m: &[Vec<BigRational>]) -> Vec<BigRational> {
    let n = m.len();
    let zero = BigRational::zero();
    let mul = |a: &[Vec<BigRational>], b: &[Vec<BigRational>]| -> Vec<Vec<BigRational>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).fold(zero.clone(), |s, t| s + &a[i][t] * &b[t][j])).collect()).collect()
    };
    let mut c = vec![zero.clone(); n + 1];
    c[n] = BigRational::from_integer(BigInt::from(1));
    let mut mk: Vec<Vec<BigRational>> = vec![vec![zero.clone(); n]; n];
    for k in 1..=n {
        let mut next = mul(m, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &c[n - k + 1];
        }
        mk = next;
        let amk = mul(m, &mk);
        let tr = (0..n).fold(zero.clone(), |s, i| s + &amk[i][i]);
        c[n - k] = -tr / BigRational::from_integer(BigInt::from(k as i64));
    }
    c
}

/// Largest coefficient gap between `prod (x - lambda_i)` built from the
/// computed eigenvalues and the exact characteristic polynomial, relative
/// to the largest exact coefficient.
pub fn charpoly_gap(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ints: Vec<Vec<i64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-9..=9)).collect()).collect();
    let exact: Vec<Vec<BigRational>> =
        ints.iter().map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect()).collect();
    let m = DenseMatrix::from_fn(n, n, |i, j| ints[i][j] as f64);
    let coeffs: Vec<f64> = charpoly_exact(&exact).iter().map(|c| c.to_f64().unwrap()).collect();
    let values = eig_small(&m).unwrap().values;
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for lam in &values {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (d, p) in poly.iter().enumerate() {
            next[d + 1] += p;
            next[d] -= p * lam;
        }
        poly = next;
    }
    let scale = coeffs.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    poly.iter().zip(&coeffs).map(|(p, c)| (p - c).norm()).fold(0.0, f64::max) / scale
}

/// Every finite binary16 value, ascending, as f64.
pub fn all_finite_fp16() -> Vec<f64> {
    let mut v: Vec<f64> = (0..=u16::MAX)
        .map(|b| half::f16::from_bits(b).to_f64())
        .filter(|x| x.is_finite())
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Exactness, idempotence, monotonicity and agreement with an independent
/// binary16 conversion, over every finite fp16 value and the points around
/// each midpoint.
pub fn fp16_exhaustive() -> Result<usize, String> {
    let values = all_finite_fp16();
    // 63488 finite encodings, +0 and -0 collapse to one f64.
    if values.len() != 63487 {
        return Err(format!("expected 63487 distinct finite values, got {}", values.len()));
    }
    let r = |x: f64| round_scalar(x, Format::Half);
    for &x in &values {
        if r(x) != x {
            return Err(format!("{x:e} is representable but rounded to {:e}", r(x)));
        }
    }
    let mut prev = f64::NEG_INFINITY;
    let mut checked = 0;
    for w in values.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        // The oracle converts from f32, so probes off the f32 grid are pinned
        // to the neighbour they are closer to.
        let probes = [(w[0], w[0]), (mid.next_down(), w[0]), (mid, f64::NAN), (mid.next_up(), w[1]), (w[1], w[1])];
        for &(p, near) in &probes {
            let y = r(p);
            let oracle = if near.is_nan() { half::f16::from_f32(p as f32).to_f64() } else { near };
            if y != oracle {
                return Err(format!("round({p:e}) = {y:e}, oracle {oracle:e}"));
            }
            if r(y) != y {
                return Err(format!("not idempotent at {p:e}"));
            }
            if y < prev {
                return Err(format!("not monotone at {p:e}"));
            }
            prev = y;
            checked += 1;
        }
    }
    let top = 65504.0f64;
    if r(65519.99) != top || r(65520.0) != f64::INFINITY || r(-65520.0) != f64::NEG_INFINITY {
        return Err("overflow threshold is not at 65520".into());
    }
    Ok(checked)
}
