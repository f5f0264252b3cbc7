//! GCRO-DR(m, k): restarted GMRES with deflation and a recycle space that
//! persists across solves with the same operator.

mod ritz;

pub use ritz::{harmonic_ritz_first, harmonic_ritz_recycle};

use crate::densela::{qr_reduced_in, DenseMatrix, LuFactors};
use crate::dispatch_format;
use crate::error::{Error, Result};
use crate::gmres::kernels::{axmy, axpy, dot, nrm2, to_f64, to_scalar};
use crate::gmres::{
    default_max_cycles, Arnoldi, ArnoldiBasis, GmresOutcome, InnerStatus, PrecondOperator, Stopping, ToleranceMode,
};
use crate::precision::{Format, PrecisionContext, Scalar};

/// Recycle triple with `Ã U_k = C_k` and `C_k^T C_k = I`.
#[derive(Debug, Clone)]
pub struct RecycleSpace {
    /// Harmonic Ritz basis handed to the next solve.
    pub yk: DenseMatrix,
    pub uk: DenseMatrix,
    pub ck: DenseMatrix,
    pub k_eff: usize,
}

#[derive(Debug, Clone)]
pub struct GcrodrConfig {
    pub m: usize,
    pub k: usize,
    pub tau: f64,
    pub max_cycles: usize,
    pub matvec_ctx: PrecisionContext,
    pub work_fmt: Format,
    pub reorth: bool,
    pub tol_mode: ToleranceMode,
    /// Record `U_k`, `C_k` and the Krylov block after every cycle.
    pub trace: bool,
}

impl GcrodrConfig {
    pub fn new(n: usize, m: usize, k: usize, tau: f64, matvec_ctx: PrecisionContext, work_fmt: Format) -> Self {
        Self {
            m,
            k,
            tau,
            max_cycles: default_max_cycles(n, m),
            matvec_ctx,
            work_fmt,
            reorth: true,
            tol_mode: ToleranceMode::Preconditioned,
            trace: false,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(1 <= self.k && self.k < self.m && self.m <= n) {
            return Err(Error::InvalidConfig(format!("need 1 <= k < m <= n, got k={}, m={}, n={n}", self.k, self.m)));
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

/// Snapshot taken at the end of a cycle.
#[derive(Debug, Clone)]
pub struct CycleTrace {
    /// Arnoldi steps (Krylov operator applications) in this cycle.
    pub steps: usize,
    /// Recycle dimension used during the cycle (0 for a plain GMRES cycle).
    pub k_used: usize,
    /// Krylov block `V_{j+1}` of the cycle.
    pub v: DenseMatrix,
    /// Recycle pair used during the cycle (before the end-of-cycle update).
    pub c_used: Option<DenseMatrix>,
    /// Recycle pair after the end-of-cycle update.
    pub uk: Option<DenseMatrix>,
    pub ck: Option<DenseMatrix>,
    /// Recurrence residual norm before and after the minimisation, relative
    /// to `||s||`, and the recomputed true value.
    pub relres_before: f64,
    pub relres_after: f64,
    pub relres_true: f64,
}

#[derive(Debug, Clone)]
pub struct GcrodrOutcome {
    pub outcome: GmresOutcome,
    pub recycle: Option<RecycleSpace>,
    pub trace: Vec<CycleTrace>,
    pub notes: Vec<String>,
}

type Cols<T> = Vec<Vec<T>>;

fn to_matrix<T: Scalar>(n: usize, cols: &[Vec<T>]) -> DenseMatrix {
    let c: Vec<Vec<f64>> = cols.iter().map(|c| to_f64(c)).collect();
    DenseMatrix::from_columns(n, &c)
}

fn from_matrix<T: Scalar>(m: &DenseMatrix) -> Cols<T> {
    (0..m.cols()).map(|j| to_scalar(m.col(j))).collect()
}

/// `sum_j coef[j] * cols[j]` in `T`.
fn combine<T: Scalar>(n: usize, cols: &[&[T]], coef: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (c, col) in coef.iter().zip(cols) {
        if *c != T::zero() {
            axpy(*c, col, &mut out);
        }
    }
    out
}

/// `Y R^{-1}` column by column in `T`.
fn right_solve_upper<T: Scalar>(y: &[Vec<T>], r: &DenseMatrix) -> Cols<T> {
    let mut u: Cols<T> = Vec::with_capacity(y.len());
    for j in 0..y.len() {
        let mut col = y[j].clone();
        for (i, ui) in u.iter().enumerate() {
            axmy(T::from_f64(r[(i, j)]), ui, &mut col);
        }
        let d = T::from_f64(r[(j, j)]);
        u.push(col.into_iter().map(|v| v / d).collect());
    }
    u
}

/// Projects the matrix `basis * p` columns: `out[:, c] = sum_i basis_i p_ic`.
fn apply_small<T: Scalar>(n: usize, basis: &[&[T]], p: &DenseMatrix) -> Cols<T> {
    (0..p.cols())
        .map(|c| {
            let coef: Vec<T> = (0..p.rows()).map(|i| T::from_f64(p[(i, c)])).collect();
            combine(n, basis, &coef)
        })
        .collect()
}

/// Rescales each column of `P` by a power of two so that `G P` has columns
/// of norm about one. Vectors belonging to tiny harmonic Ritz values would
/// otherwise fail the rank test of the QR of `G P` on scale alone.
fn scale_to_unit_image(g: &DenseMatrix, mut p: DenseMatrix) -> DenseMatrix {
    let gp = g.matmul(&p);
    for j in 0..p.cols() {
        let norm = gp.col(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            let s = 2f64.powi(-(norm.log2().round() as i32));
            for v in p.col_mut(j) {
                *v *= s;
            }
        }
    }
    p
}

struct Solver<'o, 'a, T> {
    op: &'o PrecondOperator<'a>,
    cfg: &'o GcrodrConfig,
    n: usize,
    work: Format,
    u: Cols<T>,
    c: Cols<T>,
    notes: Vec<String>,
}

impl<'o, 'a, T: Scalar> Solver<'o, 'a, T> {
    fn pair_cap(&self) -> usize {
        (self.cfg.k + 1).min(self.cfg.m - 1)
    }

    /// `C = W Q`, `U = Y R^{-1}` from `QR(G P) = Q R`; `None` when `G P` is
    /// rank deficient.
    fn rebuild(&self, gp: &DenseMatrix, w: &[&[T]], y: &[Vec<T>]) -> Option<(Cols<T>, Cols<T>)> {
        let (q, r) = qr_reduced_in(gp, self.work).ok()?;
        let c = apply_small(self.n, w, &q);
        let u = right_solve_upper(y, &r);
        // W is only orthonormal to working accuracy, so C = W Q drifts; a
        // second QR restores C^T C = I while keeping A U = C.
        let (q2, r2) = qr_reduced_in(&to_matrix(self.n, &c), self.work).ok()?;
        let c = from_matrix(&q2);
        let u = right_solve_upper(&u, &r2);
        if u.iter().chain(&c).any(|v| v.iter().any(|x| !x.is_finite())) {
            return None;
        }
        Some((u, c))
    }

    /// `x += U C^T r`, `r -= C C^T r`, keeping the residual orthogonal to `C`.
    fn project(&self, x: &mut [T], r: &mut [T]) {
        for (ci, ui) in self.c.iter().zip(&self.u) {
            let p = dot(ci, r);
            axpy(p, ui, x);
            axmy(p, ci, r);
        }
    }

    /// Rebuilds `C`, `U` from a carried-over basis `Y` (`Ã Y = C R`, `U = Y R^{-1}`).
    fn adopt(&mut self, yk: &DenseMatrix) -> Result<bool> {
        let y: Cols<T> = from_matrix(yk);
        let ay: Cols<T> = y.iter().map(|v| self.op.apply_aux(v)).collect::<Result<_>>()?;
        match qr_reduced_in(&to_matrix(self.n, &ay), self.work) {
            Ok((q, r)) => {
                self.c = from_matrix(&q);
                self.u = right_solve_upper(&y, &r);
                Ok(true)
            }
            Err(_) => {
                self.notes.push("degenerate recycle space discarded; cold start".into());
                Ok(false)
            }
        }
    }
}

fn gcrodr_generic<T: Scalar>(
    op: &PrecondOperator<'_>,
    r_rhs: &[f64],
    cfg: &GcrodrConfig,
    recycle_in: Option<&RecycleSpace>,
) -> Result<GcrodrOutcome> {
    let n = op.dim();
    let work = cfg.work_fmt;
    let mut sv = Solver::<T> { op, cfg, n, work, u: vec![], c: vec![], notes: vec![] };
    let mut x = vec![T::zero(); n];
    let s: Vec<T> = op.precond_residual(r_rhs, None)?;
    let s_norm = nrm2(&s).to_f64();
    let mut its: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut basis = None;

    let finish = |sv: Solver<'_, '_, T>, x: Vec<T>, its, status, relres, basis, trace| {
        let recycle = if sv.u.is_empty() {
            None
        } else {
            let uk = to_matrix(n, &sv.u);
            Some(RecycleSpace { yk: uk.clone(), uk, ck: to_matrix(n, &sv.c), k_eff: sv.u.len() })
        };
        let outcome = GmresOutcome {
            solution: to_f64(&x),
            iterations_per_cycle: its,
            converged: status != InnerStatus::StagnationAbort,
            status,
            final_relres: relres,
            basis,
            krylov_applications: op.krylov_applications(),
            auxiliary_applications: op.auxiliary_applications(),
        };
        GcrodrOutcome { outcome, recycle, trace, notes: sv.notes }
    };

    if s_norm == 0.0 {
        if let Some(rin) = recycle_in {
            sv.u = from_matrix(&rin.yk);
            sv.c = from_matrix(&rin.ck);
        }
        return Ok(finish(sv, x, its, InnerStatus::Converged, 0.0, None, trace));
    }
    let stop = Stopping::new(cfg.tol_mode, cfg.tau, s_norm, r_rhs);
    let mut r = s.clone();
    let m = cfg.m;

    if let Some(rin) = recycle_in {
        if rin.yk.rows() != n {
            return Err(Error::DimensionMismatch { what: "recycle space", expected: n, found: rin.yk.rows() });
        }
        if rin.yk.cols() > 0 && sv.adopt(&rin.yk)? {
            sv.project(&mut x, &mut r);
        }
    }

    if sv.c.is_empty() {
        // plain GMRES(m) cycle, identical to the first cycle of gmres_solve
        let beta = nrm2(&r);
        let mut arn = Arnoldi::new(op, &r, beta, &[], cfg.reorth);
        let mut met = false;
        while arn.steps() < m {
            let est = arn.step()?;
            if arn.happy {
                break;
            }
            if cfg.tol_mode == ToleranceMode::Preconditioned && stop.estimate_met(est.to_f64()) {
                met = true;
                break;
            }
        }
        let j = arn.steps();
        let y = arn.coefficients();
        axpy(T::one(), &arn.combine(&y), &mut x);
        // r = V_{j+1} (beta e1 - H̄ y)
        let hbar = arn.hessenberg();
        let mut c_small = vec![0.0; j + 1];
        c_small[0] = beta.to_f64();
        let hy = hbar.matvec(&to_f64(&y));
        let coef: Vec<T> = c_small.iter().zip(&hy).map(|(a, b)| T::from_f64(*a) - T::from_f64(*b)).collect();
        let vrefs: Vec<&[T]> = arn.v.iter().map(|v| v.as_slice()).collect();
        let relres_before = beta.to_f64() / s_norm;
        r = combine(n, &vrefs, &coef);
        its.push(j);
        basis = Some(ArnoldiBasis { v: arn.basis_matrix(), h: hbar.clone() });

        let keff = cfg.k;
        if j >= keff {
            let h = hbar.block(0, j, 0, j);
            let hsub = hbar[(j, j - 1)];
            let vm = to_matrix(n, &arn.v[..j]);
            match harmonic_ritz_first(&h, hsub, &vm, keff, sv.pair_cap().min(j)) {
                Ok((p, _, fallback)) if p.cols() > 0 => {
                    if fallback {
                        sv.notes.push("singular H_m; using Ritz vectors".into());
                    }
                    let p = scale_to_unit_image(&hbar, p).rounded(work);
                    let yk = apply_small(n, &vrefs[..j], &p);
                    let gp = hbar.matmul(&p).rounded(work);
                    match sv.rebuild(&gp, &vrefs, &yk) {
                        Some((u, c)) => {
                            sv.u = u;
                            sv.c = c;
                        }
                        None => sv.notes.push("rank-deficient H̄ P_k; no recycle space".into()),
                    }
                }
                Ok(_) => {}
                Err(e) => sv.notes.push(format!("harmonic Ritz extraction failed: {e}")),
            }
        }
        let relres_true = stop.true_relres(op, &x)?;
        let relres_after = nrm2(&r).to_f64() / s_norm;
        if cfg.trace {
            trace.push(CycleTrace {
                steps: j,
                k_used: 0,
                v: to_matrix(n, &arn.v),
                c_used: None,
                uk: (!sv.u.is_empty()).then(|| to_matrix(n, &sv.u)),
                ck: (!sv.c.is_empty()).then(|| to_matrix(n, &sv.c)),
                relres_before,
                relres_after,
                relres_true,
            });
        }
        if arn.happy {
            return Ok(finish(sv, x, its, InnerStatus::HappyBreakdown, relres_true, basis, trace));
        }
        if met || relres_true <= cfg.tau {
            return Ok(finish(sv, x, its, InnerStatus::Converged, relres_true, basis, trace));
        }
        if (relres_after - relres_true).abs() > 10.0 * cfg.tau {
            r = op.precond_residual(r_rhs, Some(&x))?;
            sv.project(&mut x, &mut r);
            sv.notes.push("recurrence residual replaced by true residual".into());
        }
    }

    let mut relres = nrm2(&r).to_f64() / s_norm;
    while its.len() < cfg.max_cycles {
        if relres <= cfg.tau && cfg.tol_mode == ToleranceMode::Preconditioned {
            return Ok(finish(sv, x, its, InnerStatus::Converged, relres, basis, trace));
        }
        let keff = sv.c.len();
        let steps_max = m - keff;
        // A small recurrence residual can carry a relatively large component
        // along C; the deflated Arnoldi process needs it removed.
        if cfg.reorth {
            let rn = nrm2(&r).to_f64();
            let worst = sv.c.iter().map(|c| dot(c, &r).abs().to_f64()).fold(0.0, f64::max);
            if worst > 10.0 * cfg.work_fmt.unit_roundoff() * rn {
                sv.project(&mut x, &mut r);
            }
        }
        let beta = nrm2(&r);
        if beta == T::zero() {
            return Ok(finish(sv, x, its, InnerStatus::Converged, 0.0, basis, trace));
        }
        let c_used = cfg.trace.then(|| to_matrix(n, &sv.c));
        let cblock = std::mem::take(&mut sv.c);
        let mut arn = Arnoldi::new(op, &r, beta, &cblock, cfg.reorth);
        while arn.steps() < steps_max {
            let est = arn.step()?;
            if arn.happy {
                break;
            }
            if cfg.tol_mode == ToleranceMode::Preconditioned && stop.estimate_met(est.to_f64()) {
                break;
            }
        }
        let j = arn.steps();
        its.push(j);
        let hbar = arn.hessenberg();
        let bmat = arn.b_matrix();
        basis = Some(ArnoldiBasis { v: arn.basis_matrix(), h: hbar.clone() });

        // Ũ = U D with D = diag(1 / ||u_i||)
        let dk: Vec<T> = sv.u.iter().map(|ui| T::one() / nrm2(ui)).collect();
        let ut: Cols<T> = sv.u.iter().zip(&dk).map(|(ui, d)| ui.iter().map(|v| *v * *d).collect()).collect();
        let dim = keff + j;
        let mut g = DenseMatrix::zeros(dim + 1, dim);
        for i in 0..keff {
            g[(i, i)] = dk[i].to_f64();
            for c in 0..j {
                g[(i, keff + c)] = bmat[(i, c)];
            }
        }
        for rr in 0..=j {
            for c in 0..j {
                g[(keff + rr, keff + c)] = hbar[(rr, c)];
            }
        }
        let vhat: Vec<&[T]> = ut.iter().map(|v| v.as_slice()).chain(arn.v[..j].iter().map(|v| v.as_slice())).collect();
        let what: Vec<&[T]> = cblock.iter().map(|v| v.as_slice()).chain(arn.v.iter().map(|v| v.as_slice())).collect();
        // min ||W^T r - G y||: the leading block [D B] is square in D, so
        // y_U = D^{-1}(C^T r - B y_V) zeroes it exactly and y_V is the
        // Givens solution of the Arnoldi part. Applied through U rather
        // than Ũ this avoids the D^{-1} scaling altogether.
        let yv = arn.coefficients();
        let ctr: Vec<T> = cblock.iter().map(|ci| dot(ci, &r)).collect();
        let z: Vec<T> = (0..keff)
            .map(|i| (0..j).fold(ctr[i], |acc, c| acc - arn.b[c][i] * yv[c]))
            .collect();
        let urefs: Vec<&[T]> = sv.u.iter().map(|v| v.as_slice()).collect();
        axpy(T::one(), &combine(n, &urefs, &z), &mut x);
        axpy(T::one(), &arn.combine(&yv), &mut x);
        let hy: Vec<T> = (0..=j)
            .map(|rr| (0..j).fold(T::zero(), |acc, c| if rr < arn.h[c].len() { acc + arn.h[c][rr] * yv[c] } else { acc }))
            .collect();
        let relres_before = beta.to_f64() / s_norm;
        let coef: Vec<T> = ctr.iter().chain(&hy).copied().collect();
        let dr = combine(n, &what, &coef);
        for (ri, di) in r.iter_mut().zip(&dr) {
            *ri = *ri - *di;
        }

        // new harmonic Ritz vectors from the generalised problem
        let wtv = DenseMatrix::from_fn(dim + 1, dim, |a, b| dot(what[a], vhat[b]).to_f64());
        let cap = sv.pair_cap().min(dim);
        let mut updated = false;
        match ritz::harmonic_ritz_recycle_from_wtv(&g, &wtv, cfg.k.min(dim), cap) {
            Ok(p) if p.cols() > 0 => {
                let p = scale_to_unit_image(&g, p).rounded(work);
                let yk = apply_small(n, &vhat, &p);
                let gp = g.matmul(&p).rounded(work);
                match sv.rebuild(&gp, &what, &yk) {
                    Some((u, c)) => {
                        sv.u = u;
                        sv.c = c;
                        updated = true;
                    }
                    None => sv.notes.push("rank-deficient Ḡ P_k; keeping previous recycle space".into()),
                }
            }
            Ok(_) => {}
            Err(e) => sv.notes.push(format!("recycle update skipped: {e}")),
        }
        if !updated {
            sv.c = cblock.clone();
        }

        let relres_true = stop.true_relres(op, &x)?;
        relres = nrm2(&r).to_f64() / s_norm;
        if cfg.trace {
            trace.push(CycleTrace {
                steps: j,
                k_used: keff,
                v: to_matrix(n, &arn.v),
                c_used,
                uk: (!sv.u.is_empty()).then(|| to_matrix(n, &sv.u)),
                ck: (!sv.c.is_empty()).then(|| to_matrix(n, &sv.c)),
                relres_before,
                relres_after: relres,
                relres_true,
            });
        }
        if arn.happy || relres_true <= cfg.tau {
            let status = if arn.happy { InnerStatus::HappyBreakdown } else { InnerStatus::Converged };
            return Ok(finish(sv, x, its, status, relres_true, basis, trace));
        }
        if (relres - relres_true).abs() > 10.0 * cfg.tau {
            r = op.precond_residual(r_rhs, Some(&x))?;
            sv.project(&mut x, &mut r);
            relres = nrm2(&r).to_f64() / s_norm;
            sv.notes.push("recurrence residual replaced by true residual".into());
        }
    }
    let relres_true = stop.true_relres(op, &x)?;
    let status = if relres_true <= cfg.tau { InnerStatus::Converged } else { InnerStatus::StagnationAbort };
    Ok(finish(sv, x, its, status, relres_true, basis, trace))
}

/// Solves `U^{-1} L^{-1} A d = U^{-1} L^{-1} r` by GCRO-DR(m, k), starting
/// from `d = 0` and the optional recycle space of a previous solve.
pub fn gcrodr_solve(
    a: &DenseMatrix,
    f: &LuFactors,
    r: &[f64],
    cfg: &GcrodrConfig,
    recycle_in: Option<&RecycleSpace>,
) -> Result<GcrodrOutcome> {
    let op = PrecondOperator::new(a, f, cfg.matvec_ctx, cfg.work_fmt)?;
    gcrodr_with(&op, r, cfg, recycle_in)
}

/// As [`gcrodr_solve`] with a caller-owned operator.
pub fn gcrodr_with(
    op: &PrecondOperator<'_>,
    r: &[f64],
    cfg: &GcrodrConfig,
    recycle_in: Option<&RecycleSpace>,
) -> Result<GcrodrOutcome> {
    let n = op.dim();
    cfg.validate(n)?;
    if r.len() != n {
        return Err(Error::DimensionMismatch { what: "gcrodr_solve", expected: n, found: r.len() });
    }
    dispatch_format!(cfg.work_fmt, T => gcrodr_generic::<T>(op, r, cfg, recycle_in))
}
