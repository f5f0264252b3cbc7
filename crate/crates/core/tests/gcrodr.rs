mod common;

use common::*;
use mpir::densela::{lu_factor, DenseMatrix};
use mpir::gcrodr::{gcrodr_solve, GcrodrConfig};
use mpir::gmres::{gmres_solve, GmresConfig};
use mpir::precision::Format;

fn relative_gap(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    num / den
}

#[test]
fn identity_operator_converges_in_one_step() {
    let a = DenseMatrix::identity(12);
    let f = lu_factor(&a, Format::Double.context()).unwrap();
    let cfg = GcrodrConfig::new(12, 6, 2, 1e-12, Format::Double.context(), Format::Double);
    let out = gcrodr_solve(&a, &f, &random_vector(12, 3), &cfg, None).unwrap();
    assert!(out.outcome.converged);
    assert_eq!(out.outcome.iterations(), 1);
    assert!(relative_gap(&out.outcome.solution, &random_vector(12, 3)) < 1e-15);
}

#[test]
fn cold_first_cycle_matches_gmres() {
    // Exact factors, and inexact ones so the cycle takes several steps.
    for (seed, uf) in (0..5).flat_map(|s| [(s, Format::Double), (s, Format::Single)]) {
        let n = 40;
        let a = if uf == Format::Double { well_conditioned(n, seed) } else { randsvd(n, 1e3, seed) };
        let f = lu_factor(&a, uf.context()).unwrap();
        let r = random_vector(n, 100 + seed);
        let ctx = Format::Double.context();
        let mut g = GmresConfig::new(n, 10, 1e-30, ctx, Format::Double);
        g.max_cycles = 1;
        let mut c = GcrodrConfig::new(n, 10, 3, 1e-30, ctx, Format::Double);
        c.max_cycles = 1;
        let xg = gmres_solve(&a, &f, &r, &g, &vec![0.0; n]).unwrap();
        let xc = gcrodr_solve(&a, &f, &r, &c, None).unwrap();
        assert_eq!(xg.iterations_per_cycle, xc.outcome.iterations_per_cycle);
        let gap = relative_gap(&xg.solution, &xc.outcome.solution);
        assert!(gap <= 10.0 * Format::Double.unit_roundoff(), "seed {seed}: gap {gap:e}");
    }
}

#[test]
fn recycled_cycles_apply_the_operator_m_minus_k_times() {
    let n = 60;
    let (m, k) = (12, 4);
    let a = randsvd(n, 1e10, 7);
    let mut cfg = GcrodrConfig::new(n, m, k, 1e-10, Format::Quad.context(), Format::Double);
    cfg.trace = true;
    let rhs: Vec<Vec<f64>> = (0..3).map(|s| random_vector(n, s)).collect();
    let run = recycled_run(&a, Format::Single, &cfg, &rhs);
    let mut recycled = 0;
    for s in &run.solves {
        let cycles = &s.trace;
        for (i, t) in cycles.iter().enumerate() {
            if t.k_used > 0 && i + 1 < cycles.len() {
                assert_eq!(t.steps, m - t.k_used);
                recycled += 1;
            }
        }
        let steps: usize = cycles.iter().map(|t| t.steps).sum();
        assert_eq!(steps, s.outcome.krylov_applications);
    }
    assert!(recycled > 0, "no recycled cycle was exercised");
}

#[test]
fn recycle_pair_invariants_hold_in_double() {
    let n = 60;
    let (m, k) = (12, 4);
    let u = Format::Double.unit_roundoff();
    for seed in 0..3 {
        let a = randsvd(n, 1e8, seed);
        let mut cfg = GcrodrConfig::new(n, m, k, 1e-12, Format::Quad.context(), Format::Double);
        cfg.trace = true;
        let rhs: Vec<Vec<f64>> = (0..2).map(|s| random_vector(n, 10 * seed + s)).collect();
        let run = recycled_run(&a, Format::Single, &cfg, &rhs);
        let at = explicit_operator(&a, &run.factors);
        let mut seen = 0;
        for t in traced_pairs(&run) {
            let d = defects(&at, t.uk.as_ref().unwrap(), t.ck.as_ref().unwrap());
            assert!(d.image <= 1e3 * u * m as f64, "seed {seed}: image defect {:e}", d.image);
            assert!(d.orth <= 1e3 * u * k as f64, "seed {seed}: orthogonality defect {:e}", d.orth);
            seen += 1;
        }
        assert!(seen > 0);
        for t in run.solves.iter().flat_map(|s| &s.trace) {
            if let Some(c) = &t.c_used {
                let cross = c.t_matmul(&t.v);
                let percol: Vec<String> = (0..cross.cols()).map(|j| format!("{:.1e}", cross.col(j).iter().fold(0.0f64, |a, b| a.max(b.abs())))).collect();
                eprintln!("{}", percol.join(" "));
                let cross = cross.frobenius_norm();
                assert!(cross <= 1e2 * u * m as f64, "seed {seed}: |C^T V| {cross:e}");
            }
            assert!(t.relres_after <= t.relres_before * (1.0 + 1e-12), "seed {seed}: residual grew");
        }
    }
}

#[test]
fn recycle_space_is_carried_and_helps() {
    let n = 60;
    let a = randsvd(n, 1e10, 11);
    let f = lu_factor(&a, Format::Single.context()).unwrap();
    let cfg = GcrodrConfig::new(n, 16, 6, 1e-10, Format::Quad.context(), Format::Double);
    let r = random_vector(n, 5);
    let cold = gcrodr_solve(&a, &f, &r, &cfg, None).unwrap();
    assert!(cold.outcome.converged);
    let space = cold.recycle.expect("recycle space after a multi-cycle solve");
    assert_eq!(space.uk.cols(), space.k_eff);
    let warm = gcrodr_solve(&a, &f, &r, &cfg, Some(&space)).unwrap();
    assert!(warm.outcome.converged);
    assert!(warm.outcome.iterations() < cold.outcome.iterations());
}

#[test]
fn rejects_invalid_dimensions() {
    let a = DenseMatrix::identity(8);
    let f = lu_factor(&a, Format::Double.context()).unwrap();
    let ctx = Format::Double.context();
    for (m, k) in [(4, 0), (4, 4), (9, 2)] {
        let cfg = GcrodrConfig::new(8, m, k, 1e-8, ctx, Format::Double);
        assert!(gcrodr_solve(&a, &f, &[1.0; 8], &cfg, None).is_err(), "m={m} k={k}");
    }
    let cfg = GcrodrConfig::new(8, 4, 2, 1e-8, ctx, Format::Double);
    assert!(gcrodr_solve(&a, &f, &[1.0; 7], &cfg, None).is_err());
}
