//! Experiment runner: problem generation, method sweeps, spectrum dumps,
//! recycle-dimension scans and table emission.

mod emit;

pub use emit::{emit, emit_to_string, OutputFormat};

use crate::densela::{apply_preconditioned, cond_2, cond_inf, eig_small, lu_factor, DenseMatrix};
use crate::error::{Error, Result};
use crate::matgen::{gen_prolate, gen_randsvd, read_matrix_market, rhs_ones, Equilibration, ProlateSpec, RandSvdSpec};
use crate::precision::{Format, PrecisionTriple};
use crate::refine::{format_cell, refine, ConvergenceRule, Method, RefineConfig, RefinementReport};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// The family of test matrices a sweep runs over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSet {
    RandSvd { n: usize, kappas: Vec<f64> },
    Prolate { n: usize, alphas: Vec<f64> },
    Mtx { paths: Vec<PathBuf> },
}

impl ProblemSet {
    pub fn len(&self) -> usize {
        match self {
            ProblemSet::RandSvd { kappas, .. } => kappas.len(),
            ProblemSet::Prolate { alphas, .. } => alphas.len(),
            ProblemSet::Mtx { paths } => paths.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Problem identifiers in sweep order.
    pub fn ids(&self) -> Vec<String> {
        match self {
            ProblemSet::RandSvd { kappas, .. } => kappas.iter().map(|k| format!("randsvd_{k:e}")).collect(),
            ProblemSet::Prolate { alphas, .. } => alphas.iter().map(|a| format!("prolate_{a}")).collect(),
            ProblemSet::Mtx { paths } => paths
                .iter()
                .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
                .collect(),
        }
    }

    fn load(&self, index: usize, seed: u64) -> Result<DenseMatrix> {
        match self {
            ProblemSet::RandSvd { n, kappas } => gen_randsvd(&RandSvdSpec { n: *n, kappa2: kappas[index], seed }),
            ProblemSet::Prolate { n, alphas } => gen_prolate(&ProlateSpec { n: *n, alpha: alphas[index] }),
            ProblemSet::Mtx { paths } => read_matrix_market(&paths[index]),
        }
    }
}

/// A method-by-problem experiment grid with shared solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub problems: ProblemSet,
    pub methods: Vec<Method>,
    pub precisions: PrecisionTriple,
    pub m: usize,
    pub k: usize,
    /// `None` picks the working-precision default.
    pub tau: Option<f64>,
    pub seed: u64,
    pub i_max: usize,
    pub rule: ConvergenceRule,
    pub c_conv: f64,
    pub scale_diag: bool,
}

impl SweepSpec {
    pub fn new(problems: ProblemSet, methods: Vec<Method>, precisions: PrecisionTriple, m: usize, k: usize) -> Self {
        let base = RefineConfig::new(Method::GmresIr, precisions, m, k);
        Self {
            problems,
            methods,
            precisions,
            m,
            k,
            tau: None,
            seed: 1,
            i_max: base.i_max,
            rule: base.rule,
            c_conv: base.c_conv,
            scale_diag: false,
        }
    }

    pub fn config(&self, method: Method) -> RefineConfig {
        let mut cfg = RefineConfig::new(method, self.precisions, self.m, self.k);
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        cfg.i_max = self.i_max;
        cfg.rule = self.rule;
        cfg.c_conv = self.c_conv;
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            return Err(Error::EmptyProblemSet);
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        Ok(())
    }
}

/// One (problem, method) result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub problem_id: String,
    #[serde(deserialize_with = "crate::serde_nan::f64_or_nan")]
    pub kappa_inf: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64_or_nan")]
    pub kappa_2: f64,
    pub method: Method,
    pub m: usize,
    pub k: usize,
    pub tau: f64,
    pub converged: bool,
    pub steps: usize,
    pub total_inner: usize,
    pub per_step: Vec<usize>,
    #[serde(deserialize_with = "crate::serde_nan::f64_or_nan")]
    pub nbe_final: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64_or_nan")]
    pub ferr_final: f64,
    pub divergence_reason: Option<String>,
    /// Set when the run could not be performed at all.
    pub error: Option<String>,
    pub report: Option<RefinementReport>,
}

impl SweepRow {
    /// Table cell, `"total (c1,c2,...)"` or `"-"`.
    pub fn cell(&self) -> String {
        if self.converged {
            format_cell(self.total_inner, &self.per_step)
        } else {
            "-".into()
        }
    }
}

struct Prepared {
    a: DenseMatrix,
    b: Vec<f64>,
    kappa_inf: f64,
    kappa_2: f64,
    eq: Option<Equilibration>,
}

fn prepare(spec: &SweepSpec, index: usize) -> Result<Prepared> {
    let a = spec.problems.load(index, spec.seed)?;
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let kappa_inf = cond_inf(&a).unwrap_or(f64::INFINITY);
    let kappa_2 = cond_2(&a);
    let b = rhs_ones(a.rows());
    if spec.scale_diag {
        let eq = Equilibration::compute(&a);
        let (sa, sb) = eq.apply(&a, &b);
        Ok(Prepared { a: sa, b: sb, kappa_inf, kappa_2, eq: Some(eq) })
    } else {
        Ok(Prepared { a, b, kappa_inf, kappa_2, eq: None })
    }
}

fn row_for(spec: &SweepSpec, id: &str, method: Method, prepared: &std::result::Result<Prepared, String>) -> SweepRow {
    let cfg = spec.config(method);
    let mut row = SweepRow {
        problem_id: id.to_string(),
        kappa_inf: f64::NAN,
        kappa_2: f64::NAN,
        method,
        m: cfg.m,
        k: if method.is_recycling() { cfg.k } else { 0 },
        tau: cfg.tau,
        converged: false,
        steps: 0,
        total_inner: 0,
        per_step: vec![],
        nbe_final: f64::NAN,
        ferr_final: f64::NAN,
        divergence_reason: None,
        error: None,
        report: None,
    };
    let p = match prepared {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.clone());
            return row;
        }
    };
    row.kappa_inf = p.kappa_inf;
    row.kappa_2 = p.kappa_2;
    match refine(&p.a, &p.b, &cfg) {
        Ok(mut rep) => {
            if let Some(eq) = &p.eq {
                rep.solution = eq.unscale_solution(&rep.solution);
            }
            row.converged = rep.converged;
            row.steps = rep.steps;
            row.total_inner = rep.total_inner;
            row.per_step = rep.inner_iters.clone();
            row.nbe_final = rep.nbe_history.last().copied().unwrap_or(f64::NAN);
            row.ferr_final = rep.ferr_history.last().copied().unwrap_or(f64::NAN);
            row.divergence_reason = rep.divergence_reason.map(|r| r.to_string());
            row.report = Some(rep);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every (problem, method) pair. Pairs run in parallel; rows come
/// back in problem-major, method-minor order. Failures of individual runs
/// are recorded in their rows.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let ids = spec.problems.ids();
    let prepared: Vec<std::result::Result<Prepared, String>> =
        (0..ids.len()).into_par_iter().map(|i| prepare(spec, i).map_err(|e| e.to_string())).collect();
    let pairs: Vec<(usize, Method)> =
        (0..ids.len()).flat_map(|i| spec.methods.iter().map(move |&m| (i, m))).collect();
    Ok(pairs.into_par_iter().map(|(i, method)| row_for(spec, &ids[i], method, &prepared[i])).collect())
}

/// Eigenvalues of one matrix of a spectrum dump; `Err` holds the solver
/// failure message.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub name: String,
    pub values: std::result::Result<Vec<Complex64>, String>,
}

/// Spectra of `A`, of `U^{-1} L^{-1} A` with binary64 LU factors, and of
/// the same with factors computed in `uf`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub sets: Vec<PointSet>,
}

impl Spectrum {
    /// Writes `set,re,im` rows for every completed set.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["set", "re", "im"]).map_err(csv_err)?;
        for set in &self.sets {
            if let Ok(values) = &set.values {
                for z in values {
                    w.write_record([set.name.as_str(), &z.re.to_string(), &z.im.to_string()]).map_err(csv_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Serialize(e.to_string())
}

/// Explicit `U^{-1} L^{-1} A`, formed column by column in binary64.
pub fn preconditioned_matrix(a: &DenseMatrix, uf: Format) -> Result<DenseMatrix> {
    let n = a.rows();
    let f = lu_factor(a, uf.context())?;
    let ctx = Format::Double.context();
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(apply_preconditioned(a, &f, &e, ctx, Format::Double)?);
        e[j] = 0.0;
    }
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// The three eigenvalue sets of a preconditioning study. A set whose
/// eigensolve (or factorization) fails carries the error; the others are
/// still computed.
pub fn spectrum_dump(a: &DenseMatrix, uf: Format) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.rows() > 500 {
        return Err(Error::InvalidConfig(format!("spectrum dump is limited to n <= 500, got {}", a.rows())));
    }
    let eigs = |m: Result<DenseMatrix>| -> std::result::Result<Vec<Complex64>, String> {
        let m = m.map_err(|e| e.to_string())?;
        eig_small(&m).map(|p| p.values).map_err(|e| e.to_string())
    };
    let sets = vec![
        PointSet { name: "A".into(), values: eigs(Ok(a.clone())) },
        PointSet { name: "double_lu".into(), values: eigs(preconditioned_matrix(a, Format::Double)) },
        PointSet { name: format!("{uf}_lu"), values: eigs(preconditioned_matrix(a, uf)) },
    ];
    Ok(Spectrum { sets })
}

/// Total inner iterations of RGMRES-IR for one recycle dimension; `-1`
/// marks a divergent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KscanRow {
    pub k: usize,
    pub total_inner: i64,
    pub cell: String,
}

/// Runs the recycling method of `cfg` once per `k`.
pub fn kscan(a: &DenseMatrix, b: &[f64], cfg: &RefineConfig, ks: &[usize]) -> Result<Vec<KscanRow>> {
    if !cfg.method.is_recycling() {
        return Err(Error::InvalidConfig(format!("kscan needs a recycling method, got {}", cfg.method)));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k >= cfg.m) {
        return Err(Error::InvalidConfig(format!("k = {bad} must satisfy 1 <= k < m = {}", cfg.m)));
    }
    ks.par_iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.k = k;
            let rep = refine(a, b, &c)?;
            let total_inner = if rep.converged { rep.total_inner as i64 } else { -1 };
            Ok(KscanRow { k, total_inner, cell: rep.cell() })
        })
        .collect()
}
