//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion, with
//! the individual checks below it, and exits non-zero only when a criterion
//! outside `KNOWN_RED` fails.
//!
//! Heavy; run with `cargo test --release --test acceptance` for speed.

mod common;

use common::*;
use mpir::densela::lu_factor;
use mpir::gcrodr::{gcrodr_solve, GcrodrConfig};
use mpir::gmres::{gmres_solve, GmresConfig};
use mpir::harness::{run_sweep, spectrum_dump, ProblemSet, SweepRow, SweepSpec};
use mpir::precision::{Format, PrecisionTriple};
use mpir::refine::{refine, ConvergenceRule, Method, RefineConfig};
use std::path::PathBuf;
use std::time::Instant;

/// Criteria that are known not to be met; each has an analysis in the
/// project notes. They are reported as FAIL but do not fail the run.
const KNOWN_RED: [u8; 3] = [1, 2, 4];

enum Status {
    Pass,
    Fail,
    NotEvaluated,
}

struct Verdict {
    status: Status,
    lines: Vec<String>,
}

impl Verdict {
    fn from_checks(lines: Vec<(bool, String)>) -> Self {
        let ok = lines.iter().all(|(b, _)| *b);
        let lines = lines.into_iter().map(|(b, l)| format!("{} {l}", if b { "ok  " } else { "MISS" })).collect();
        Verdict { status: if ok { Status::Pass } else { Status::Fail }, lines }
    }
}

type Steps = Option<&'static [usize]>;

/// (alpha, GMRES-IR, RGMRES-IR); `None` is a divergent run.
const SDQ_TARGET: [(f64, Steps, Steps); 8] = [
    (0.475, Some(&[2, 3]), Some(&[2, 3])),
    (0.47, Some(&[2, 3]), Some(&[2, 3])),
    (0.467, Some(&[3, 4]), Some(&[3, 4])),
    (0.455, Some(&[6, 7]), Some(&[6, 2])),
    (0.45, Some(&[7, 8]), Some(&[7, 4])),
    (0.4468, Some(&[7, 9, 9]), Some(&[7, 4, 4])),
    (0.44, Some(&[10, 12, 12]), Some(&[10, 5, 4])),
    (0.434, Some(&[13, 14, 14]), Some(&[13, 6, 6])),
];

const HSD_TARGET: [(f64, Steps, Steps); 8] = [
    (0.475, Some(&[6, 6]), Some(&[6, 2])),
    (0.47, Some(&[8, 8]), Some(&[8, 2])),
    (0.467, Some(&[9, 10]), Some(&[9, 2])),
    (0.455, Some(&[15, 25, 10]), Some(&[15, 4])),
    (0.45, Some(&[14, 43, 32]), None),
    (0.4468, None, None),
    (0.44, None, None),
    (0.434, None, None),
];

/// (matrix, GMRES-IR, RGMRES-IR) at (half, single, double), (40, 6).
const SUITESPARSE_TARGET: [(&str, &[usize], &[usize]); 3] = [
    ("orsirr_1", &[6, 6], &[6, 6]),
    ("comsol", &[22, 24], &[22, 8]),
    ("circuit204", &[12, 14, 14], &[12, 9, 8]),
];

fn triple(uf: Format, u: Format, ur: Format) -> PrecisionTriple {
    PrecisionTriple::new(uf, u, ur).unwrap()
}

/// Reproduction settings for the deterministic tables: all error measures or
/// the relative correction at the working unit roundoff.
fn reproduction(spec: &mut SweepSpec) {
    spec.rule = ConvergenceRule::AllErrorsOrCorrection;
    spec.c_conv = 1.0;
}

fn sweep(problems: ProblemSet, p: PrecisionTriple, m: usize, k: usize, tau: f64, seed: u64) -> Vec<SweepRow> {
    let mut spec = SweepSpec::new(problems, vec![Method::GmresIr, Method::RGmresIr], p, m, k);
    spec.tau = Some(tau);
    spec.seed = seed;
    reproduction(&mut spec);
    run_sweep(&spec).unwrap()
}

fn cell(steps: Steps) -> String {
    match steps {
        Some(s) => format!("{} ({})", s.iter().sum::<usize>(), s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")),
        None => "-".into(),
    }
}

fn within(got: usize, want: usize, rel: f64) -> bool {
    (got as f64 - want as f64).abs() <= rel * want as f64
}

fn per_step_close(got: &[usize], want: &[usize], slack: usize) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| g.abs_diff(*w) <= slack)
}

fn row_for<'a>(rows: &'a [SweepRow], id_suffix: &str, method: Method) -> &'a SweepRow {
    rows.iter().find(|r| r.problem_id.ends_with(id_suffix) && r.method == method).unwrap()
}

fn criterion_1() -> Verdict {
    let alphas: Vec<f64> = SDQ_TARGET.iter().map(|t| t.0).collect();
    let rows = sweep(
        ProblemSet::Prolate { n: 100, alphas },
        triple(Format::Single, Format::Double, Format::Quad),
        16,
        4,
        1e-8,
        1,
    );
    let mut checks = Vec::new();
    for (alpha, g_want, r_want) in SDQ_TARGET {
        let id = format!("_{alpha}");
        let g = row_for(&rows, &id, Method::GmresIr);
        let r = row_for(&rows, &id, Method::RGmresIr);
        for (row, want) in [(g, g_want.unwrap()), (r, r_want.unwrap())] {
            let ok = row.converged
                && per_step_close(&row.per_step, want, 2)
                && within(row.total_inner, want.iter().sum(), 0.2);
            checks.push((ok, format!("alpha {alpha} {}: {} vs {}", row.method, row.cell(), cell(Some(want)))));
        }
        if alpha <= 0.455 {
            let ok = r.converged && g.converged && r.total_inner <= g.total_inner;
            checks.push((ok, format!("alpha {alpha}: RGMRES-IR {} <= GMRES-IR {}", r.total_inner, g.total_inner)));
        }
    }
    Verdict::from_checks(checks)
}

fn criterion_2() -> Verdict {
    let alphas: Vec<f64> = HSD_TARGET.iter().map(|t| t.0).collect();
    let rows = sweep(
        ProblemSet::Prolate { n: 100, alphas },
        triple(Format::Half, Format::Single, Format::Double),
        16,
        5,
        1e-4,
        1,
    );
    let mut checks = Vec::new();
    for (alpha, g_want, r_want) in HSD_TARGET {
        let id = format!("_{alpha}");
        let g = row_for(&rows, &id, Method::GmresIr);
        let r = row_for(&rows, &id, Method::RGmresIr);
        if alpha >= 0.455 {
            let ok = g.converged && r.converged && r.total_inner < g.total_inner;
            checks.push((ok, format!("alpha {alpha}: both converge, RGMRES-IR {} < GMRES-IR {}", r.cell(), g.cell())));
        }
        if alpha <= 0.4468 {
            let ok = !g.converged && !r.converged;
            checks.push((ok, format!("alpha {alpha}: both diverge ({} / {})", g.cell(), r.cell())));
        }
        if alpha == 0.45 {
            let reason = r.divergence_reason.as_deref().unwrap_or("none");
            checks.push((reason == "InnerStagnation", format!("alpha 0.45 RGMRES-IR divergence reason {reason}")));
        }
        for (row, want) in [(g, g_want), (r, r_want)] {
            if let (Some(w), true) = (want, row.converged) {
                let ok = within(row.total_inner, w.iter().sum(), 0.25);
                checks.push((ok, format!("alpha {alpha} {}: {} vs {} (+-25%)", row.method, row.cell(), cell(Some(w)))));
            } else if want.is_some() != row.converged {
                checks.push((false, format!("alpha {alpha} {}: {} vs {}", row.method, row.cell(), cell(want))));
            }
        }
    }
    Verdict::from_checks(checks)
}

fn criterion_3() -> Verdict {
    let Some(dir) = std::env::var_os("MPIR_SUITESPARSE_DIR").map(PathBuf::from) else {
        return Verdict {
            status: Status::NotEvaluated,
            lines: vec!["set MPIR_SUITESPARSE_DIR to a directory holding orsirr_1.mtx, comsol.mtx, circuit204.mtx".into()],
        };
    };
    let paths: Vec<PathBuf> = SUITESPARSE_TARGET.iter().map(|t| dir.join(format!("{}.mtx", t.0))).collect();
    if let Some(missing) = paths.iter().find(|p| !p.exists()) {
        return Verdict { status: Status::NotEvaluated, lines: vec![format!("missing {}", missing.display())] };
    }
    let rows = sweep(ProblemSet::Mtx { paths }, triple(Format::Half, Format::Single, Format::Double), 40, 6, 1e-4, 1);
    let mut checks = Vec::new();
    for (name, g_want, r_want) in SUITESPARSE_TARGET {
        for (method, want) in [(Method::GmresIr, g_want), (Method::RGmresIr, r_want)] {
            let row = rows.iter().find(|r| r.problem_id == name && r.method == method).unwrap();
            let mut ok = row.converged && within(row.total_inner, want.iter().sum(), 0.25);
            if name == "orsirr_1" {
                ok &= per_step_close(&row.per_step, want, 2);
            }
            checks.push((ok, format!("{name} {method}: {} vs {}", row.cell(), cell(Some(want)))));
        }
    }
    Verdict::from_checks(checks)
}

fn criterion_4() -> Verdict {
    // The generator's random stream differs from the one behind the
    // target counts, so trends are judged on the mean over seeds.
    let seeds = 1..=5u64;
    let kappas = [1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15];
    let p = triple(Format::Single, Format::Double, Format::Quad);
    let runs: Vec<Vec<SweepRow>> = seeds
        .clone()
        .map(|s| sweep(ProblemSet::RandSvd { n: 100, kappas: kappas.to_vec() }, p, 80, 18, 1e-8, s))
        .collect();
    let total = |run: &[SweepRow], i: usize, m: Method| -> Option<usize> {
        let row = run.iter().filter(|r| r.method == m).nth(i).unwrap();
        row.converged.then_some(row.total_inner)
    };
    let mut checks = Vec::new();
    let mut means = [[f64::NAN; 5]; 2];
    for i in 0..5 {
        for (mi, m) in [Method::GmresIr, Method::RGmresIr].into_iter().enumerate() {
            let t: Option<Vec<usize>> = runs.iter().map(|r| total(r, i, m)).collect();
            means[mi][i] = t.map_or(f64::NAN, |t| t.iter().sum::<usize>() as f64 / t.len() as f64);
        }
        let ok = means[1][i] <= means[0][i];
        checks.push((ok, format!("(a) kappa {:.0e}: mean RGMRES-IR {:.1} <= mean GMRES-IR {:.1}", kappas[i], means[1][i], means[0][i])));
    }
    for (mi, name) in ["GMRES-IR", "RGMRES-IR"].iter().enumerate() {
        let ok = means[mi].windows(2).all(|w| w[1] >= w[0]);
        let list: Vec<String> = means[mi].iter().map(|v| format!("{v:.1}")).collect();
        checks.push((ok, format!("(b) {name} mean totals non-decreasing: {}", list.join(" "))));
    }
    let mut per_seed_a = 0;
    let mut per_seed_b = 0;
    for run in &runs {
        for i in 0..5 {
            if total(run, i, Method::RGmresIr) > total(run, i, Method::GmresIr) {
                per_seed_a += 1;
            }
        }
        for m in [Method::GmresIr, Method::RGmresIr] {
            if (0..4).any(|i| total(run, i + 1, m) < total(run, i, m)) {
                per_seed_b += 1;
            }
        }
    }
    checks.push((true, format!("(info) per-seed exceptions: {per_seed_a} to (a), {per_seed_b} seed/method runs to (b)")));
    for (i, kappa) in [(5usize, 1e14), (6, 1e15)] {
        for (s, run) in seeds.clone().zip(&runs) {
            let g = run.iter().filter(|r| r.method == Method::GmresIr).nth(i).unwrap();
            let r = run.iter().filter(|r| r.method == Method::RGmresIr).nth(i).unwrap();
            let ok = !g.converged && g.divergence_reason.as_deref() == Some("InnerStagnation") && r.converged;
            checks.push((
                ok,
                format!(
                    "(c) kappa {kappa:.0e} seed {s}: GMRES-IR {} [{}], RGMRES-IR {}",
                    g.cell(),
                    g.divergence_reason.as_deref().unwrap_or("converged"),
                    r.cell()
                ),
            ));
        }
    }
    Verdict::from_checks(checks)
}

fn criterion_5() -> Verdict {
    let n = 60;
    let (m, k) = (16, 4);
    let u = Format::Double.unit_roundoff();
    let (mut worst_image, mut worst_orth) = (0.0f64, 0.0f64);
    let (mut pairs, mut recycled, mut count_ok) = (0, 0, true);
    for seed in 0..10 {
        let kappa = 10f64.powi(4 + (seed % 5) as i32);
        let a = randsvd(n, kappa, 200 + seed);
        let mut cfg = GcrodrConfig::new(n, m, k, 1e-12, Format::Quad.context(), Format::Double);
        cfg.trace = true;
        let rhs: Vec<Vec<f64>> = (0..3).map(|s| random_vector(n, 10 * seed + s)).collect();
        let run = recycled_run(&a, Format::Half, &cfg, &rhs);
        let at = explicit_operator(&a, &run.factors);
        for t in traced_pairs(&run) {
            let d = defects(&at, t.uk.as_ref().unwrap(), t.ck.as_ref().unwrap());
            worst_image = worst_image.max(d.image);
            worst_orth = worst_orth.max(d.orth);
            pairs += 1;
        }
        for s in &run.solves {
            let last = s.trace.len().saturating_sub(1);
            for (i, t) in s.trace.iter().enumerate() {
                if t.k_used > 0 && i < last {
                    recycled += 1;
                    count_ok &= t.steps == m - t.k_used;
                }
            }
            count_ok &= s.trace.iter().map(|t| t.steps).sum::<usize>() == s.outcome.krylov_applications;
        }
    }
    Verdict::from_checks(vec![
        (
            worst_image <= 1e3 * u * m as f64,
            format!("max ||AU-C||/(||A|| ||U||) = {worst_image:.2e} <= {:.2e} over {pairs} pairs", 1e3 * u * m as f64),
        ),
        (worst_orth <= 1e3 * u * k as f64, format!("max ||C^T C - I|| = {worst_orth:.2e} <= {:.2e}", 1e3 * u * k as f64)),
        (count_ok && recycled > 0, format!("m - k operator applications in all {recycled} full recycled cycles")),
    ])
}

fn criterion_6() -> Verdict {
    let n = 30;
    let mut checks = Vec::new();
    let mut worst_steps = (0, 0);
    let mut all_ok = true;
    for seed in 0..20 {
        let a = well_conditioned(n, seed);
        let b = random_vector(n, 300 + seed);
        for method in [Method::GmresIr, Method::RGmresIr] {
            let cfg = RefineConfig::new(method, PrecisionTriple::uniform(Format::Double), 10, 3);
            let r = refine(&a, &b, &cfg).unwrap();
            all_ok &= r.converged && r.steps == 1 && r.total_inner <= 3;
            worst_steps = (worst_steps.0.max(r.steps), worst_steps.1.max(r.total_inner));
        }
    }
    checks.push((all_ok, format!("20 systems x 2 methods: worst {} step(s), {} inner", worst_steps.0, worst_steps.1)));

    let mut worst_gap = 0.0f64;
    let mut same_counts = true;
    for seed in 0..20 {
        let a = randsvd(n, 1e3, 400 + seed);
        let f = lu_factor(&a, Format::Single.context()).unwrap();
        let r = random_vector(n, 500 + seed);
        let ctx = Format::Double.context();
        let mut g = GmresConfig::new(n, 10, 1e-30, ctx, Format::Double);
        g.max_cycles = 1;
        let mut c = GcrodrConfig::new(n, 10, 3, 1e-30, ctx, Format::Double);
        c.max_cycles = 1;
        let xg = gmres_solve(&a, &f, &r, &g, &vec![0.0; n]).unwrap();
        let xc = gcrodr_solve(&a, &f, &r, &c, None).unwrap();
        same_counts &= xg.iterations_per_cycle == xc.outcome.iterations_per_cycle;
        let num: f64 = xg.solution.iter().zip(&xc.outcome.solution).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den: f64 = xg.solution.iter().map(|p| p * p).sum::<f64>().sqrt();
        worst_gap = worst_gap.max(num / den);
    }
    let bound = 10.0 * Format::Double.unit_roundoff();
    checks.push((
        same_counts && worst_gap <= bound,
        format!("cold first cycle vs GMRES(m): worst relative gap {worst_gap:.2e} <= {bound:.2e}"),
    ));
    Verdict::from_checks(checks)
}

fn criterion_7() -> Verdict {
    let mut checks = Vec::new();
    for fmt in [Format::Half, Format::Single, Format::Double] {
        let (ratio, mult) = lu_backward_ratio(fmt, 20, 0..20);
        checks.push((
            ratio <= 4.0 && mult <= 1.0 + fmt.unit_roundoff(),
            format!("LU {fmt}: ||PA-LU|| <= {ratio:.3} n u rho ||A||, max multiplier {mult:.4}"),
        ));
    }
    let eig = eig_residual_ratio(30, 0..10);
    checks.push((eig <= 1e3, format!("eigen residual <= {eig:.1} u ||M|| (bound 1e3)")));
    let gap = (1..=5).flat_map(|n| (0..10).map(move |s| charpoly_gap(n, 50 * n as u64 + s))).fold(0.0, f64::max);
    checks.push((gap <= 1e-11, format!("characteristic polynomial, n <= 5: worst coefficient gap {gap:.2e}")));
    match fp16_exhaustive() {
        Ok(c) => checks.push((true, format!("fp16: all finite values exact, {c} probes idempotent, monotone, oracle-equal"))),
        Err(e) => checks.push((false, format!("fp16: {e}"))),
    }
    Verdict::from_checks(checks)
}

fn criterion_8() -> Verdict {
    let a = randsvd(100, 1e12, 1);
    let s = spectrum_dump(&a, Format::Half).unwrap();
    let set = |name: &str| s.sets.iter().find(|p| p.name == name).unwrap().values.clone();
    let mut checks = Vec::new();
    match set("double_lu") {
        Ok(v) => {
            let near = v.iter().filter(|z| (*z - 1.0).norm() <= 0.1).count() as f64 / v.len() as f64;
            checks.push((near >= 0.95, format!("double LU: {:.0}% of eigenvalues within 0.1 of 1", 100.0 * near)));
        }
        Err(e) => checks.push((false, format!("double LU spectrum failed: {e}"))),
    }
    match set("half_lu") {
        Ok(v) => {
            let small = v.iter().filter(|z| z.norm() < 0.5).count() as f64 / v.len() as f64;
            checks.push((small >= 0.05, format!("half LU: {:.0}% of eigenvalues with |lambda| < 0.5", 100.0 * small)));
        }
        Err(e) => checks.push((false, format!("half LU spectrum failed: {e}"))),
    }
    Verdict::from_checks(checks)
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; only a bare
    // numeric argument list selects criteria.
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u8, &str, fn() -> Verdict); 8] = [
        (1, "prolate (single,double,quad) table", criterion_1),
        (2, "prolate (half,single,double) divergence boundary", criterion_2),
        (3, "SuiteSparse rows", criterion_3),
        (4, "randsvd trends", criterion_4),
        (5, "recycle-space invariants", criterion_5),
        (6, "solver oracle equivalence", criterion_6),
        (7, "kernel property suites", criterion_7),
        (8, "preconditioned spectrum clustering", criterion_8),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotEvaluated => "NOT EVALUATED",
        };
        println!("criterion {id}: {tag} - {name} ({:.1}s)", t.elapsed().as_secs_f64());
        for l in &v.lines {
            println!("    {l}");
        }
        if matches!(v.status, Status::Fail) && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
