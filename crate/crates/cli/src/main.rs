use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mpir::densela::DenseMatrix;
use mpir::harness::{emit, emit_to_string, kscan, run_sweep, spectrum_dump, OutputFormat, ProblemSet, SweepSpec};
use mpir::matgen::{gen_prolate, gen_randsvd, read_matrix_market, rhs_ones, write_matrix_market, ProlateSpec, RandSvdSpec};
use mpir::precision::{Format, PrecisionTriple};
use mpir::refine::{ConvergenceRule, Method};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mpir", version, about = "Mixed-precision iterative refinement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem with one method and print the report.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "gmres-ir")]
        method: Method,
        #[command(flatten)]
        solver: SolverArgs,
        /// `text` or `json`.
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every method on every problem of a grid.
    Sweep {
        #[command(flatten)]
        problems: ProblemListArgs,
        #[arg(long, value_delimiter = ',', default_value = "gmres-ir,rgmres-ir")]
        methods: Vec<Method>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of A and of its LU-preconditioned forms as CSV.
    Spectrum {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Precision of the low-precision LU factors.
        #[arg(long, default_value = "half")]
        uf: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Total inner iterations of a recycling method across recycle dimensions.
    Kscan {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "rgmres-ir")]
        method: Method,
        #[command(flatten)]
        solver: SolverArgs,
        /// Recycle dimensions, e.g. `1,2,4` or `1-15`.
        #[arg(long = "ks", default_value = "1-15")]
        ks: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated matrix in Matrix Market format.
    Gen {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Prolate parameter alpha.
    #[arg(long, group = "source")]
    prolate: Option<f64>,
    /// Target 2-norm condition number of a randsvd matrix.
    #[arg(long, group = "source")]
    randsvd: Option<f64>,
    /// Matrix Market file.
    #[arg(long, group = "source")]
    mtx: Option<PathBuf>,
    /// Order of generated matrices.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ProblemArgs {
    fn set(&self) -> Result<ProblemSet> {
        Ok(match (self.prolate, self.randsvd, &self.mtx) {
            (Some(a), None, None) => ProblemSet::Prolate { n: self.n, alphas: vec![a] },
            (None, Some(k), None) => ProblemSet::RandSvd { n: self.n, kappas: vec![k] },
            (None, None, Some(p)) => ProblemSet::Mtx { paths: vec![p.clone()] },
            _ => bail!("give exactly one of --prolate, --randsvd or --mtx"),
        })
    }

    fn matrix(&self) -> Result<DenseMatrix> {
        Ok(match self.set()? {
            ProblemSet::Prolate { n, alphas } => gen_prolate(&ProlateSpec { n, alpha: alphas[0] })?,
            ProblemSet::RandSvd { n, kappas } => gen_randsvd(&RandSvdSpec { n, kappa2: kappas[0], seed: self.seed })?,
            ProblemSet::Mtx { paths } => read_matrix_market(&paths[0])?,
        })
    }
}

#[derive(Args)]
struct ProblemListArgs {
    #[arg(long, value_delimiter = ',', group = "sources")]
    prolate: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', group = "sources")]
    randsvd: Option<Vec<f64>>,
    #[arg(long, num_args = 1.., group = "sources")]
    mtx: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ProblemListArgs {
    fn set(&self) -> Result<ProblemSet> {
        Ok(match (&self.prolate, &self.randsvd, &self.mtx) {
            (Some(a), None, None) => ProblemSet::Prolate { n: self.n, alphas: a.clone() },
            (None, Some(k), None) => ProblemSet::RandSvd { n: self.n, kappas: k.clone() },
            (None, None, Some(p)) => ProblemSet::Mtx { paths: p.clone() },
            _ => bail!("give exactly one of --prolate, --randsvd or --mtx"),
        })
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "single")]
    uf: Format,
    #[arg(long, default_value = "double")]
    u: Format,
    #[arg(long, default_value = "quad")]
    ur: Format,
    /// Restart length (Krylov subspace size).
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Recycle dimension for the recycling methods.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Inner tolerance; defaults to 1e-4 (single) or 1e-8 (double).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    imax: usize,
    /// backward-error, all-errors, correction or all-errors-or-correction.
    #[arg(long, default_value = "backward-error")]
    rule: ConvergenceRule,
    #[arg(long, default_value_t = 10.0)]
    c_conv: f64,
    /// Two-sided power-of-two diagonal equilibration.
    #[arg(long)]
    scale_diag: bool,
}

impl SolverArgs {
    fn spec(&self, problems: ProblemSet, methods: Vec<Method>, seed: u64) -> Result<SweepSpec> {
        let p = PrecisionTriple::new(self.uf, self.u, self.ur)?;
        let mut spec = SweepSpec::new(problems, methods, p, self.m, self.k);
        spec.tau = self.tau;
        spec.seed = seed;
        spec.i_max = self.imax;
        spec.rule = self.rule;
        spec.c_conv = self.c_conv;
        spec.scale_diag = self.scale_diag;
        Ok(spec)
    }
}

fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            ks.extend(a..=b);
        } else {
            ks.push(part.parse()?);
        }
    }
    if ks.is_empty() {
        bail!("empty k list");
    }
    Ok(ks)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { problem, method, solver, format, out } => {
            let spec = solver.spec(problem.set()?, vec![method], problem.seed)?;
            let rows = run_sweep(&spec)?;
            let row = &rows[0];
            if let Some(e) = &row.error {
                bail!("{}: {e}", row.problem_id);
            }
            let text = match format.as_str() {
                "json" => emit_to_string(&rows, OutputFormat::Json)?,
                "text" => {
                    let mut s = format!(
                        "{} {} {}: {}\n  kappa_inf {:.3e}  kappa_2 {:.3e}\n  steps {}  nbe {:.3e}  ferr {:.3e}\n",
                        row.problem_id,
                        row.method,
                        spec.precisions.label(),
                        row.cell(),
                        row.kappa_inf,
                        row.kappa_2,
                        row.steps,
                        row.nbe_final,
                        row.ferr_final
                    );
                    if let Some(r) = &row.divergence_reason {
                        s += &format!("  diverged: {r}\n");
                    }
                    let mut notes: Vec<(&str, usize)> = Vec::new();
                    for d in row.report.iter().flat_map(|r| &r.diagnostics) {
                        match notes.iter_mut().find(|(n, _)| *n == d.as_str()) {
                            Some((_, c)) => *c += 1,
                            None => notes.push((d, 1)),
                        }
                    }
                    for (d, c) in notes {
                        s += &if c > 1 { format!("  note: {d} (x{c})\n") } else { format!("  note: {d}\n") };
                    }
                    s
                }
                other => bail!("unknown format `{other}` (text or json)"),
            };
            write_or_print(&out, &text)
        }
        Command::Sweep { problems, methods, solver, format, out } => {
            let spec = solver.spec(problems.set()?, methods, problems.seed)?;
            let rows = run_sweep(&spec)?;
            match out {
                Some(p) => emit(&rows, format, &p)?,
                None => print!("{}", emit_to_string(&rows, format)?),
            }
            Ok(())
        }
        Command::Spectrum { problem, uf, out } => {
            let a = problem.matrix()?;
            let s = spectrum_dump(&a, uf)?;
            for set in &s.sets {
                if let Err(e) = &set.values {
                    eprintln!("warning: spectrum of {} failed: {e}", set.name);
                }
            }
            match out {
                Some(p) => s.write_file(&p)?,
                None => s.write_csv(std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Kscan { problem, method, solver, ks, out } => {
            let a = problem.matrix()?;
            let spec = solver.spec(problem.set()?, vec![method], problem.seed)?;
            let cfg = spec.config(method);
            let rows = kscan(&a, &rhs_ones(a.rows()), &cfg, &parse_ks(&ks)?)?;
            let mut text = String::from("k,total_inner,cell\n");
            for r in rows {
                text += &format!("{},{},{}\n", r.k, r.total_inner, r.cell);
            }
            write_or_print(&out, &text)
        }
        Command::Gen { problem, out } => {
            let a = problem.matrix()?;
            write_matrix_market(&a, &out)?;
            Ok(())
        }
    }
}
