//! Restarted left-preconditioned GMRES(m) in a simulated working precision.

mod arnoldi;
pub(crate) mod kernels;
mod operator;

pub(crate) use arnoldi::Arnoldi;
pub use operator::PrecondOperator;

use crate::densela::{DenseMatrix, LuFactors};
use crate::dispatch_format;
use crate::error::{Error, Result};
use crate::precision::{Format, PrecisionContext, Scalar};
use kernels::{axpy, nrm2, to_f64, to_scalar};
use serde::{Deserialize, Serialize};

/// What the inner tolerance is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceMode {
    /// `||s - Ã d||_2 / ||s||_2` with `s = U^{-1} L^{-1} r`, via the Givens
    /// estimate.
    Preconditioned,
    /// `||r - A d||_2 / ||r||_2`, checked on the true residual at every step.
    Unpreconditioned,
}

#[derive(Debug, Clone)]
pub struct GmresConfig {
    pub m: usize,
    pub tau: f64,
    pub max_cycles: usize,
    pub matvec_ctx: PrecisionContext,
    pub work_fmt: Format,
    pub reorth: bool,
    pub tol_mode: ToleranceMode,
}

impl GmresConfig {
    /// Defaults: `max_cycles = ceil(10 n / m)`, reorthogonalisation on,
    /// preconditioned tolerance.
    pub fn new(n: usize, m: usize, tau: f64, matvec_ctx: PrecisionContext, work_fmt: Format) -> Self {
        Self {
            m,
            tau,
            max_cycles: default_max_cycles(n, m),
            matvec_ctx,
            work_fmt,
            reorth: true,
            tol_mode: ToleranceMode::Preconditioned,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m > n {
            return Err(Error::InvalidConfig(format!("restart length m = {} must lie in 1..={n}", self.m)));
        }
        if !(self.tau > 0.0) || self.max_cycles == 0 {
            return Err(Error::InvalidConfig("tau must be positive and max_cycles >= 1".into()));
        }
        if self.work_fmt == Format::Quad {
            return Err(Error::InvalidConfig("quad working precision is not supported".into()));
        }
        Ok(())
    }
}

pub fn default_max_cycles(n: usize, m: usize) -> usize {
    (10 * n).div_ceil(m.max(1)).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    /// Exact invariant subspace found (`h_{j+1,j} = 0`); treated as converged.
    HappyBreakdown,
    /// Cycle budget exhausted without meeting the tolerance.
    StagnationAbort,
}

/// Arnoldi data of one cycle: `Ã V_j = V_{j+1} H̄_j`.
#[derive(Debug, Clone)]
pub struct ArnoldiBasis {
    pub v: DenseMatrix,
    pub h: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    pub iterations_per_cycle: Vec<usize>,
    pub converged: bool,
    pub status: InnerStatus,
    /// True relative residual at exit, in the configured tolerance mode.
    pub final_relres: f64,
    pub basis: Option<ArnoldiBasis>,
    pub krylov_applications: usize,
    pub auxiliary_applications: usize,
}

impl GmresOutcome {
    pub fn iterations(&self) -> usize {
        self.iterations_per_cycle.iter().sum()
    }
}

/// Tracks the stopping rule shared by GMRES and GCRO-DR.
pub(crate) struct Stopping<'r> {
    pub mode: ToleranceMode,
    pub tau: f64,
    /// `||s||_2`, the initial preconditioned residual.
    pub s_norm: f64,
    pub r: &'r [f64],
    pub r_norm: f64,
}

impl<'r> Stopping<'r> {
    pub fn new(mode: ToleranceMode, tau: f64, s_norm: f64, r: &'r [f64]) -> Self {
        let r_norm = crate::densela::two_norm(r);
        Self { mode, tau, s_norm, r, r_norm }
    }

    pub fn estimate_met(&self, est: f64) -> bool {
        est <= self.tau * self.s_norm
    }

    /// Relative residual of iterate `x` computed from scratch.
    pub fn true_relres<T: Scalar>(&self, op: &PrecondOperator<'_>, x: &[T]) -> Result<f64> {
        match self.mode {
            ToleranceMode::Preconditioned => {
                let s: Vec<T> = op.precond_residual(self.r, Some(x))?;
                Ok(nrm2(&s).to_f64() / self.s_norm)
            }
            ToleranceMode::Unpreconditioned => Ok(op.plain_residual_norm(self.r, x) / self.r_norm),
        }
    }
}

fn gmres_generic<T: Scalar>(op: &PrecondOperator<'_>, r: &[f64], cfg: &GmresConfig, x0: &[f64]) -> Result<GmresOutcome> {
    let n = op.dim();
    let mut x: Vec<T> = to_scalar(x0);
    let zero_start = x0.iter().all(|v| *v == 0.0);
    let s0: Vec<T> = op.precond_residual(r, if zero_start { None } else { Some(&x) })?;
    let s_norm = nrm2(&s0).to_f64();
    let finish = |x: Vec<T>, its: Vec<usize>, status: InnerStatus, relres: f64, basis| GmresOutcome {
        solution: to_f64(&x),
        iterations_per_cycle: its,
        converged: status != InnerStatus::StagnationAbort,
        status,
        final_relres: relres,
        basis,
        krylov_applications: op.krylov_applications(),
        auxiliary_applications: op.auxiliary_applications(),
    };
    if s_norm == 0.0 {
        return Ok(finish(x, vec![], InnerStatus::Converged, 0.0, None));
    }
    let stop = Stopping::new(cfg.tol_mode, cfg.tau, s_norm, r);
    let mut its = Vec::new();
    let mut basis = None;
    let mut res = s0;
    let mut relres = 1.0;
    for cycle in 0..cfg.max_cycles {
        if cycle > 0 {
            res = op.precond_residual(r, Some(&x))?;
        }
        let beta = nrm2(&res);
        if beta == T::zero() {
            return Ok(finish(x, its, InnerStatus::Converged, 0.0, basis));
        }
        let mut arn = Arnoldi::new(op, &res, beta, &[], cfg.reorth);
        let mut met = false;
        while arn.steps() < cfg.m.min(n) {
            let est = arn.step()?;
            if arn.happy {
                break;
            }
            met = match cfg.tol_mode {
                ToleranceMode::Preconditioned => stop.estimate_met(est.to_f64()),
                ToleranceMode::Unpreconditioned => {
                    let mut trial = x.clone();
                    axpy(T::one(), &arn.combine(&arn.coefficients()), &mut trial);
                    op.plain_residual_norm(r, &trial) <= cfg.tau * stop.r_norm
                }
            };
            if met {
                break;
            }
        }
        let d = arn.combine(&arn.coefficients());
        axpy(T::one(), &d, &mut x);
        its.push(arn.steps());
        basis = Some(ArnoldiBasis { v: arn.basis_matrix(), h: arn.hessenberg() });
        relres = stop.true_relres(op, &x)?;
        if arn.happy {
            return Ok(finish(x, its, InnerStatus::HappyBreakdown, relres, basis));
        }
        // the restart test uses the recomputed residual, so a cycle that
        // met the tolerance only in the recurrence keeps iterating
        if met || relres <= cfg.tau {
            return Ok(finish(x, its, InnerStatus::Converged, relres, basis));
        }
    }
    Ok(finish(x, its, InnerStatus::StagnationAbort, relres, basis))
}

/// Solves `U^{-1} L^{-1} A d = U^{-1} L^{-1} r` by restarted GMRES(m).
pub fn gmres_solve(a: &DenseMatrix, f: &LuFactors, r: &[f64], cfg: &GmresConfig, x0: &[f64]) -> Result<GmresOutcome> {
    let op = PrecondOperator::new(a, f, cfg.matvec_ctx, cfg.work_fmt)?;
    gmres_with(&op, r, cfg, x0)
}

/// As [`gmres_solve`] with a caller-owned operator (for application counts).
pub fn gmres_with(op: &PrecondOperator<'_>, r: &[f64], cfg: &GmresConfig, x0: &[f64]) -> Result<GmresOutcome> {
    let n = op.dim();
    cfg.validate(n)?;
    if r.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch { what: "gmres_solve", expected: n, found: r.len().min(x0.len()) });
    }
    dispatch_format!(cfg.work_fmt, T => gmres_generic::<T>(op, r, cfg, x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::lu_factor;
    use crate::precision::Format::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = DenseMatrix::identity(4);
        let f = lu_factor(&a, Double.context()).unwrap();
        let cfg = GmresConfig::new(4, 4, 1e-8, Quad.context(), Double);
        let out = gmres_solve(&a, &f, &[1.0, 0.0, 0.0, 0.0], &cfg, &[0.0; 4]).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.solution, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_preconditioner_converges_fast() {
        for seed in 0..5 {
            let a = random_matrix(30, seed);
            let f = lu_factor(&a, Double.context()).unwrap();
            let r: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
            let cfg = GmresConfig::new(30, 10, 1e-8, Quad.context(), Double);
            let out = gmres_solve(&a, &f, &r, &cfg, &[0.0; 30]).unwrap();
            assert!(out.converged && out.iterations() <= 3, "{:?}", out.iterations_per_cycle);
            assert!(out.final_relres <= 1e-8);
        }
    }

    #[test]
    fn restarts_when_budget_per_cycle_is_small() {
        // a low-precision preconditioner leaves work for several cycles
        let a = random_matrix(40, 9);
        let f = lu_factor(&a, Half.context()).unwrap();
        let cfg = GmresConfig::new(40, 2, 1e-12, Quad.context(), Double);
        let out = gmres_solve(&a, &f, &vec![1.0; 40], &cfg, &[0.0; 40]).unwrap();
        assert!(out.converged);
        assert!(out.iterations_per_cycle.len() > 1);
        assert!(out.iterations_per_cycle.iter().all(|&c| c <= 2));
        assert_eq!(out.krylov_applications, out.iterations());
    }

    #[test]
    fn stagnation_is_reported() {
        // cyclic shift: GMRES(1) makes no progress on e1
        let n = 5;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { 1.0 } else { 0.0 });
        let f = lu_factor(&DenseMatrix::identity(n), Double.context()).unwrap();
        let mut cfg = GmresConfig::new(n, 1, 1e-8, Double.context(), Double);
        cfg.max_cycles = 7;
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let out = gmres_solve(&a, &f, &e1, &cfg, &vec![0.0; n]).unwrap();
        assert_eq!(out.status, InnerStatus::StagnationAbort);
        assert!(!out.converged);
        assert_eq!(out.iterations_per_cycle, vec![1; 7]);
    }

    #[test]
    fn unpreconditioned_mode_meets_plain_residual() {
        let a = random_matrix(20, 3);
        let f = lu_factor(&a, Half.context()).unwrap();
        let mut cfg = GmresConfig::new(20, 20, 1e-6, Quad.context(), Double);
        cfg.tol_mode = ToleranceMode::Unpreconditioned;
        let r = vec![1.0; 20];
        let out = gmres_solve(&a, &f, &r, &cfg, &[0.0; 20]).unwrap();
        assert!(out.converged);
        let ad = a.matvec(&out.solution);
        let res: Vec<f64> = r.iter().zip(&ad).map(|(x, y)| x - y).collect();
        assert!(crate::densela::two_norm(&res) <= 1e-6 * crate::densela::two_norm(&r) * 1.01);
    }

    #[test]
    fn rejects_bad_config() {
        let a = DenseMatrix::identity(3);
        let f = lu_factor(&a, Double.context()).unwrap();
        let cfg = GmresConfig::new(3, 4, 1e-8, Double.context(), Double);
        assert!(matches!(gmres_solve(&a, &f, &[1.0; 3], &cfg, &[0.0; 3]), Err(Error::InvalidConfig(_))));
        assert_eq!(default_max_cycles(100, 16), 63);
    }
}
