//! Iterative refinement drivers: SIR, GMRES-IR and recycled RGMRES-IR,
//! with optional uniform-precision inner solves.

mod metrics;

pub use metrics::ErrorMeasures;

use crate::densela::{lu_factor, lu_solve, reference_solve, DenseMatrix, LuFactors};
use crate::error::{Error, Result};
use crate::gcrodr::{gcrodr_with, GcrodrConfig, RecycleSpace};
use crate::gmres::{default_max_cycles, gmres_with, GmresConfig, GmresOutcome, PrecondOperator, ToleranceMode};
use crate::precision::{DoubleDouble, Format, PrecisionContext, PrecisionTriple};
use metrics::Metrics;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "GMRES-IR")]
    GmresIr,
    #[serde(rename = "SGMRES-IR")]
    SGmresIr,
    #[serde(rename = "RGMRES-IR")]
    RGmresIr,
    #[serde(rename = "RSGMRES-IR")]
    RSGmresIr,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Sir, Method::GmresIr, Method::SGmresIr, Method::RGmresIr, Method::RSGmresIr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sir => "SIR",
            Method::GmresIr => "GMRES-IR",
            Method::SGmresIr => "SGMRES-IR",
            Method::RGmresIr => "RGMRES-IR",
            Method::RSGmresIr => "RSGMRES-IR",
        }
    }

    pub fn is_recycling(self) -> bool {
        matches!(self, Method::RGmresIr | Method::RSGmresIr)
    }

    /// Whether the method applies the preconditioned operator in `u^2`.
    pub fn extra_precision(self) -> bool {
        matches!(self, Method::GmresIr | Method::RGmresIr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match key.as_str() {
            "sir" => Method::Sir,
            "gmresir" | "gmres" => Method::GmresIr,
            "sgmresir" | "sgmres" => Method::SGmresIr,
            "rgmresir" | "rgmres" => Method::RGmresIr,
            "rsgmresir" | "rsgmres" => Method::RSGmresIr,
            _ => return Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
        })
    }
}

/// Which error measures gate convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceRule {
    /// Normwise backward error `<= c_conv * u`.
    BackwardError,
    /// Forward, normwise and componentwise backward errors all `<= c_conv * u`
    /// (needs the reference solution).
    AllErrors,
    /// Relative correction `||x_{i+1} - x_i||_inf / ||x_{i+1}||_inf <= c_conv * u`.
    Correction,
    /// Either [`ConvergenceRule::AllErrors`] or [`ConvergenceRule::Correction`].
    AllErrorsOrCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceReason {
    IMaxExceeded,
    InnerStagnation,
    ErrorGrowth,
    /// LU in `u_f` hit an exact zero pivot.
    FactorizationFailed,
}

impl FromStr for ConvergenceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "backward-error" | "nbe" => ConvergenceRule::BackwardError,
            "all-errors" | "all" => ConvergenceRule::AllErrors,
            "correction" | "dx" => ConvergenceRule::Correction,
            "all-errors-or-correction" | "all-or-dx" => ConvergenceRule::AllErrorsOrCorrection,
            _ => return Err(Error::InvalidConfig(format!("unknown convergence rule `{s}`"))),
        })
    }
}

impl fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceReason::IMaxExceeded => "IMaxExceeded",
            DivergenceReason::InnerStagnation => "InnerStagnation",
            DivergenceReason::ErrorGrowth => "ErrorGrowth",
            DivergenceReason::FactorizationFailed => "FactorizationFailed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    Converged,
    Diverged(DivergenceReason),
}

#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub precisions: PrecisionTriple,
    pub method: Method,
    pub m: usize,
    pub k: usize,
    pub tau: f64,
    pub i_max: usize,
    pub extra_precision_matvec: bool,
    pub rule: ConvergenceRule,
    pub c_conv: f64,
    /// Inner cycle budget; `None` means `ceil(10 n / m)`.
    pub max_cycles: Option<usize>,
    pub reorth: bool,
    pub tol_mode: ToleranceMode,
}

impl RefineConfig {
    /// Defaults: `tau` from the working precision, `i_max = 10000`,
    /// `u^2` matvecs for the non-uniform methods, backward-error rule with
    /// `c_conv = 10`.
    pub fn new(method: Method, precisions: PrecisionTriple, m: usize, k: usize) -> Self {
        Self {
            precisions,
            method,
            m,
            k,
            tau: default_tau(precisions.u),
            i_max: 10_000,
            extra_precision_matvec: method.extra_precision(),
            rule: ConvergenceRule::BackwardError,
            c_conv: 10.0,
            max_cycles: None,
            reorth: true,
            tol_mode: ToleranceMode::Preconditioned,
        }
    }

    pub fn matvec_ctx(&self) -> PrecisionContext {
        let u = self.precisions.u;
        if self.extra_precision_matvec { u.doubled().context() } else { u.context() }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.i_max == 0 {
            return Err(Error::InvalidConfig("i_max must be at least 1".into()));
        }
        if self.precisions.u == Format::Quad {
            return Err(Error::InvalidConfig("quad working precision is not supported".into()));
        }
        if self.method != Method::Sir && (self.m == 0 || self.m > n) {
            return Err(Error::InvalidConfig(format!("m = {} must lie in 1..={n}", self.m)));
        }
        if self.method.is_recycling() && (self.k == 0 || self.k >= self.m) {
            return Err(Error::InvalidConfig(format!("recycling needs 1 <= k < m, got k = {}, m = {}", self.k, self.m)));
        }
        Ok(())
    }
}

pub fn default_tau(u: Format) -> f64 {
    match u {
        Format::Half | Format::Single => 1e-4,
        Format::Double | Format::Quad => 1e-8,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    pub method: Method,
    pub converged: bool,
    pub steps: usize,
    pub inner_iters: Vec<usize>,
    pub total_inner: usize,
    #[serde(deserialize_with = "crate::serde_nan::vec_f64_or_nan")]
    pub ferr_history: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec_f64_or_nan")]
    pub nbe_history: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::vec_f64_or_nan")]
    pub cbe_history: Vec<f64>,
    /// `||x_{i+1} - x_i||_inf / ||x_{i+1}||_inf`
    #[serde(deserialize_with = "crate::serde_nan::vec_f64_or_nan")]
    pub correction_history: Vec<f64>,
    pub divergence_reason: Option<DivergenceReason>,
    pub solution: Vec<f64>,
    #[serde(deserialize_with = "crate::serde_nan::f64_or_nan")]
    pub lu_growth: f64,
    pub diagnostics: Vec<String>,
}

impl RefinementReport {
    /// The table cell: `"5 (2,3)"`, or `"-"` for a divergent run.
    pub fn cell(&self) -> String {
        if self.converged {
            format_cell(self.total_inner, &self.inner_iters)
        } else {
            "-".to_string()
        }
    }
}

pub fn format_cell(total: usize, per_step: &[usize]) -> String {
    let parts: Vec<String> = per_step.iter().map(|c| c.to_string()).collect();
    format!("{total} ({})", parts.join(","))
}

/// Classifies the run after a step. `nbe` is the full backward-error
/// history including the current step.
pub fn check_convergence(
    measures: &ErrorMeasures,
    correction: f64,
    nbe_history: &[f64],
    step: usize,
    inner_stagnated: bool,
    u: f64,
    cfg: &RefineConfig,
) -> Verdict {
    let tol = cfg.c_conv * u;
    let all = measures.nbe <= tol && measures.cbe <= tol && !(measures.ferr > tol);
    let done = match cfg.rule {
        ConvergenceRule::BackwardError => measures.nbe <= tol,
        ConvergenceRule::AllErrors => all,
        ConvergenceRule::Correction => correction <= tol,
        ConvergenceRule::AllErrorsOrCorrection => all || correction <= tol,
    };
    if done {
        return Verdict::Converged;
    }
    if inner_stagnated {
        return Verdict::Diverged(DivergenceReason::InnerStagnation);
    }
    if !measures.nbe.is_finite() || error_growth(nbe_history) {
        return Verdict::Diverged(DivergenceReason::ErrorGrowth);
    }
    if step >= cfg.i_max {
        return Verdict::Diverged(DivergenceReason::IMaxExceeded);
    }
    Verdict::Continue
}

/// Three consecutive increases of at least a factor two.
pub fn error_growth(history: &[f64]) -> bool {
    let n = history.len();
    n >= 4 && history[n - 4..].windows(2).all(|w| w[1] >= 2.0 * w[0])
}

enum Inner {
    Lu,
    Gmres(GmresConfig),
    Gcrodr(GcrodrConfig, Option<RecycleSpace>),
}

/// Runs the configured method on `A x = b`.
pub fn refine(a: &DenseMatrix, b: &[f64], cfg: &RefineConfig) -> Result<RefinementReport> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::NotSquare { rows: n, cols: a.cols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { what: "refine", expected: n, found: b.len() });
    }
    cfg.validate(n)?;
    let x_ref = reference_solve(a, b).ok();
    let p = cfg.precisions;
    let uf_ctx = p.uf.context();
    let mut report = RefinementReport {
        method: cfg.method,
        converged: false,
        steps: 0,
        inner_iters: vec![],
        total_inner: 0,
        ferr_history: vec![],
        nbe_history: vec![],
        cbe_history: vec![],
        correction_history: vec![],
        divergence_reason: None,
        solution: vec![0.0; n],
        lu_growth: f64::NAN,
        diagnostics: vec![],
    };
    if x_ref.is_none() {
        report.diagnostics.push("reference solve failed; forward error not tracked".into());
    }
    let f = match lu_factor(a, uf_ctx) {
        Ok(f) => f,
        Err(e) => {
            report.diagnostics.push(format!("LU in {} failed: {e}", p.uf));
            report.divergence_reason = Some(DivergenceReason::FactorizationFailed);
            return Ok(report);
        }
    };
    report.lu_growth = f.growth;
    let max_cycles = cfg.max_cycles.unwrap_or_else(|| default_max_cycles(n, cfg.m));
    let mut inner = match cfg.method {
        Method::Sir => Inner::Lu,
        Method::GmresIr | Method::SGmresIr => {
            let mut g = GmresConfig::new(n, cfg.m, cfg.tau, cfg.matvec_ctx(), p.u);
            g.max_cycles = max_cycles;
            g.reorth = cfg.reorth;
            g.tol_mode = cfg.tol_mode;
            Inner::Gmres(g)
        }
        Method::RGmresIr | Method::RSGmresIr => {
            let mut g = GcrodrConfig::new(n, cfg.m, cfg.k, cfg.tau, cfg.matvec_ctx(), p.u);
            g.max_cycles = max_cycles;
            g.reorth = cfg.reorth;
            g.tol_mode = cfg.tol_mode;
            Inner::Gcrodr(g, None)
        }
    };
    run(a, b, cfg, &f, x_ref.as_deref(), &mut inner, report)
}

fn run(
    a: &DenseMatrix,
    b: &[f64],
    cfg: &RefineConfig,
    f: &LuFactors,
    x_ref: Option<&[DoubleDouble]>,
    inner: &mut Inner,
    mut report: RefinementReport,
) -> Result<RefinementReport> {
    let n = a.rows();
    let p = cfg.precisions;
    let (u, uf_ctx) = (p.u, p.uf.context());
    let metrics = Metrics::new(a, b, x_ref, p.ur.context());

    let mut x = lu_solve(f, b, uf_ctx, u)?;
    if x.iter().any(|v| !v.is_finite()) {
        report.diagnostics.push("initial solve overflowed; starting from x0 = 0".into());
        x = vec![0.0; n];
    }
    let op = PrecondOperator::new(a, f, cfg.matvec_ctx(), u)?;

    for step in 1..=cfg.i_max {
        let r = metrics.residual(&x);
        let nrm = r.iter().fold(DoubleDouble::ZERO, |m, v| if v.abs() > m { v.abs() } else { m });
        let mut stagnated = false;
        let mut correction = 0.0;
        if nrm == DoubleDouble::ZERO {
            report.diagnostics.push(format!("step {step}: exact zero residual"));
        } else {
            let rs: Vec<f64> = r.iter().map(|v| u.round((*v / nrm).to_f64())).collect();
            let (d, its) = match inner {
                Inner::Lu => (lu_solve(f, &rs, uf_ctx, u)?, 0),
                Inner::Gmres(g) => {
                    let out = gmres_with(&op, &rs, g, &vec![0.0; n])?;
                    stagnated = !out.converged;
                    inner_result(out)
                }
                Inner::Gcrodr(g, recycle) => {
                    let out = gcrodr_with(&op, &rs, g, recycle.as_ref())?;
                    report.diagnostics.extend(out.notes.iter().map(|s| format!("step {step}: {s}")));
                    *recycle = out.recycle;
                    stagnated = !out.outcome.converged;
                    inner_result(out.outcome)
                }
            };
            let scale = u.round(nrm.to_f64());
            let mut dmax = 0.0f64;
            for (xi, di) in x.iter_mut().zip(&d) {
                let new = u.round(*xi + u.round(scale * di));
                dmax = dmax.max((new - *xi).abs());
                *xi = new;
            }
            correction = dmax;
            report.inner_iters.push(its);
        }
        report.steps = step;
        let r_new = metrics.residual(&x);
        let e = metrics.measure(&x, &r_new);
        report.ferr_history.push(e.ferr);
        report.nbe_history.push(e.nbe);
        report.cbe_history.push(e.cbe);
        let correction = match correction / crate::densela::vec_inf_norm(&x) {
            c if c.is_nan() => f64::INFINITY,
            c => c,
        };
        report.correction_history.push(correction);
        match check_convergence(&e, correction, &report.nbe_history, step, stagnated, u.unit_roundoff(), cfg) {
            Verdict::Continue if nrm == DoubleDouble::ZERO => {
                report.converged = true;
                break;
            }
            Verdict::Continue => {}
            Verdict::Converged => {
                report.converged = true;
                break;
            }
            Verdict::Diverged(reason) => {
                report.divergence_reason = Some(reason);
                break;
            }
        }
    }
    report.total_inner = report.inner_iters.iter().sum();
    report.solution = x;
    Ok(report)
}

fn inner_result(out: GmresOutcome) -> (Vec<f64>, usize) {
    let its = out.iterations();
    (out.solution, its)
}

/// Standard iterative refinement (LU substitution as the correction solver).
pub fn sir(a: &DenseMatrix, b: &[f64], cfg: &RefineConfig) -> Result<RefinementReport> {
    expect_method(cfg, &[Method::Sir])?;
    refine(a, b, cfg)
}

/// GMRES-IR / SGMRES-IR.
pub fn gmres_ir(a: &DenseMatrix, b: &[f64], cfg: &RefineConfig) -> Result<RefinementReport> {
    expect_method(cfg, &[Method::GmresIr, Method::SGmresIr])?;
    refine(a, b, cfg)
}

/// RGMRES-IR / RSGMRES-IR: GCRO-DR inner solves with the recycle space
/// carried from each refinement step to the next.
pub fn rgmres_ir(a: &DenseMatrix, b: &[f64], cfg: &RefineConfig) -> Result<RefinementReport> {
    expect_method(cfg, &[Method::RGmresIr, Method::RSGmresIr])?;
    refine(a, b, cfg)
}

fn expect_method(cfg: &RefineConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&cfg.method) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("driver does not run {}", cfg.method)))
    }
}
