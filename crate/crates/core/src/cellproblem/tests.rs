use std::f64::consts::{FRAC_PI_6, PI};

use proptest::prelude::*;

use super::*;
use crate::geometry::rotation;
use crate::linearize::linearize_cells;

fn lat(name: &str) -> LatticeSpec {
    LatticeSpec::from_catalog(name).unwrap()
}

fn quick() -> OptimizerConfig {
    OptimizerConfig::with_seeds(0, 2)
}

fn query(lambda: Mat2, ks: Vec<usize>) -> DensityQuery {
    DensityQuery { k_schedule: ks, optimizer: quick(), ..DensityQuery::new(lambda) }
}

#[test]
fn supercell_variable_counts() {
    let sq = lat("square");
    assert_eq!(assemble_supercell(&sq, 1, BoundaryMode::ZeroBoundary, true).unwrap().num_free_nodes(), 0);
    let k = assemble_supercell(&lat("kagome"), 1, BoundaryMode::Periodic, true).unwrap();
    assert_eq!(k.num_free_nodes(), 2);
    assert_eq!(k.num_variables(), 4);
    assert_eq!(assemble_supercell(&sq, 3, BoundaryMode::Periodic, true).unwrap().num_free_nodes(), 8);
    assert_eq!(assemble_supercell(&sq, 3, BoundaryMode::Periodic, false).unwrap().num_free_nodes(), 9);
    assert!(assemble_supercell(&sq, 0, BoundaryMode::Periodic, true).is_err());
}

#[test]
fn zero_boundary_free_nodes_are_far_from_the_boundary() {
    let sq = lat("square");
    let d_m = sq.reach().d_m;
    let cell = assemble_supercell(&sq, 6, BoundaryMode::ZeroBoundary, true).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let dist = [i as f64, j as f64, 6.0 - i as f64, 6.0 - j as f64].into_iter().fold(f64::INFINITY, f64::min);
            assert_eq!(cell.is_free(0, [i, j]), dist > d_m, "node ({i}, {j})");
        }
    }
}

#[test]
fn identity_has_zero_density() {
    for name in ["kagome", "square", "square-long-range", "rotating-squares"] {
        let spec = lat(name);
        let t = effective_density(&spec, &query(Mat2::identity(), vec![1, 2])).unwrap();
        for r in &t.rows {
            assert!(r.value_exact <= 1e-10, "{name} k={} {}: {}", r.k, r.mode, r.value_exact);
        }
    }
}

#[test]
fn square_double_stretch_at_zero_corrector() {
    let spec = lat("square");
    for mode in [BoundaryMode::ZeroBoundary, BoundaryMode::Periodic] {
        let e = minimize_density(&spec, &query(Mat2::identity() * 2.0, vec![1]), 1, mode).unwrap();
        assert!((e.value_zero - 2.0).abs() < 1e-14);
        assert!(e.value_exact <= 2.0);
    }
}

#[test]
fn twisted_kagome_lengths_and_gradient() {
    let spec = lat("kagome");
    let s = twisted_kagome_state(FRAC_PI_6).unwrap();
    let f = s.field();
    for sp in spec.springs() {
        let l = (f.value(&spec, &sp.ends[1]).unwrap() - f.value(&spec, &sp.ends[0]).unwrap()).norm();
        assert!((l - 1.0).abs() < 1e-12);
    }
    let rep = verify_mechanism(&spec, &f, &s.period_cells(), 1e-12).unwrap();
    assert!(rep.holds, "{rep:?}");
    assert_eq!(rep.penalty_energy, 0.0);
    let field = linearize_cells(&f, &spec, &[[0, 0]]).unwrap();
    let mut avg = Mat2::zeros();
    let mut area = 0.0;
    for p in field.pieces() {
        avg += p.gradient * p.area();
        area += p.area();
    }
    avg /= area;
    let want = rotation(FRAC_PI_6) * FRAC_PI_6.cos();
    assert!((avg - want).abs().max() < 1e-10);
}

#[test]
fn twisted_kagome_at_zero_angle_is_identity() {
    let s = twisted_kagome_state(0.0).unwrap();
    assert_eq!(s.lambda, Mat2::identity());
    assert!(s.corrector.values().iter().all(|v| v.norm() < 1e-15));
    assert!(twisted_kagome_state(1.05).is_err());
    assert!(twisted_kagome_state(-1.1).is_err());
}

#[test]
fn verify_identity_and_stretch() {
    let spec = lat("kagome");
    let zero = Corrector::zeros(3, BoundaryMode::Periodic, 1);
    assert!(verify_mechanism(&spec, &CorrectedField::new(Mat2::identity(), &zero), &[[0, 0]], 1e-12).unwrap().holds);
    let r = verify_mechanism(&spec, &CorrectedField::new(Mat2::identity() * 2.0, &zero), &[[0, 0]], 1e-12).unwrap();
    assert!(!r.holds);
    assert!((r.max_spring_residual - 1.0).abs() < 1e-12);
}

#[test]
fn twisted_kagome_density_is_zero() {
    let spec = lat("kagome");
    let lambda = rotation(FRAC_PI_6) * FRAC_PI_6.cos();
    let e = minimize_density(&spec, &query(lambda, vec![1]), 1, BoundaryMode::Periodic).unwrap();
    assert!(e.value_exact <= 1e-8, "{}", e.value_exact);
}

#[test]
fn accordion_folds() {
    let spec = lat("square");
    let id = accordion_fold_state(1, 1).unwrap();
    assert_eq!(id.period, [1, 1]);
    let r = verify_mechanism(&spec, &id.field(), &id.period_cells(), 0.0).unwrap();
    assert!(r.holds && r.spring_energy == 0.0 && r.penalty_energy == 0.0);

    let flat = accordion_fold_state(0, 1).unwrap();
    assert_eq!(flat.period, [2, 1]);
    let r = verify_mechanism(&spec, &flat.field(), &flat.period_cells(), 0.0).unwrap();
    assert_eq!(r.max_spring_residual, 0.0);
    assert_eq!(r.reversed_triangles, 2);
    assert_eq!(r.penalty_energy, 2.0 / spec.eta());
    assert_eq!(r.summary(), "spring residual 0, penalty 2 triangles reversed");

    let half = accordion_fold_state(1, 2).unwrap();
    assert_eq!(half.period, [4, 1]);
    assert_eq!(half.lambda, Mat2::new(0.5, 0.0, 0.0, 1.0));
    let r = verify_mechanism(&spec, &half.field(), &half.period_cells(), 1e-12).unwrap();
    assert_eq!(r.reversed_triangles, 2);
    assert!(r.spring_energy < 1e-24);
    assert!(accordion_fold_state(3, 2).is_err());
    assert_eq!(accordion_fold_state(2, 4).unwrap().period, [4, 1]);
}

#[test]
fn spring_only_fold_density() {
    let spec = lat("square").without_penalty();
    for (c, k) in [(0.0, 2), (0.5, 4)] {
        let lambda = Mat2::new(c, 0.0, 0.0, 1.0);
        let e = minimize_density(&spec, &query(lambda, vec![k]), k, BoundaryMode::Periodic).unwrap();
        assert!(e.value_exact <= 1e-10, "c = {c}: {}", e.value_exact);
    }
}

#[test]
fn periodic_not_above_zero_boundary() {
    let spec = lat("kagome");
    let t = effective_density(&spec, &query(Mat2::identity() * 0.9, vec![1, 2, 3])).unwrap();
    for k in [1, 2, 3] {
        let p = t.get(k, BoundaryMode::Periodic).unwrap().value_exact;
        let z = t.get(k, BoundaryMode::ZeroBoundary).unwrap().value_exact;
        assert!(p <= z + 1e-8, "k = {k}: {p} > {z}");
    }
    let one = t.get(1, BoundaryMode::Periodic).unwrap().value_exact;
    assert!(t.value() <= one);
}

#[test]
fn gauge_pin_does_not_change_value() {
    let spec = lat("square");
    let lambda = Mat2::new(1.3, 0.2, -0.1, 0.8);
    let mut q = query(lambda, vec![2]);
    let a = minimize_density(&spec, &q, 2, BoundaryMode::Periodic).unwrap();
    q.optimizer.pin_gauge = false;
    let b = minimize_density(&spec, &q, 2, BoundaryMode::Periodic).unwrap();
    assert!((a.value_exact - b.value_exact).abs() <= 1e-10, "{} vs {}", a.value_exact, b.value_exact);
}

#[test]
fn deterministic_estimates() {
    let spec = lat("kagome");
    let q = query(Mat2::new(0.95, 0.1, 0.0, 1.05), vec![2]);
    let a = minimize_density(&spec, &q, 2, BoundaryMode::Periodic).unwrap();
    let b = minimize_density(&spec, &q, 2, BoundaryMode::Periodic).unwrap();
    assert_eq!(a, b);
}

#[test]
fn objective_gradient_matches_differences() {
    let spec = lat("kagome");
    let cell = assemble_supercell(&spec, 2, BoundaryMode::Periodic, true).unwrap();
    let e = cell.objective(&spec, &Mat2::new(0.9, 0.1, -0.2, 1.1)).unwrap();
    let pf = PenaltyFunction::smoothed(spec.eta(), 0.05);
    let x: Vec<f64> = (0..cell.num_variables()).map(|i| 0.05 * ((i * 7 % 11) as f64 - 5.0)).collect();
    let mut g = vec![0.0; x.len()];
    e.value_and_gradient(&x, &pf, &mut g).unwrap();
    let h = 1e-6;
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (e.value(&xp, &pf).unwrap() - e.value(&xm, &pf).unwrap()) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "{i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn corrector_resampling() {
    let mut c = Corrector::zeros(1, BoundaryMode::Periodic, 2);
    c.set(0, [1, 0], Vec2::new(1.0, 2.0));
    let big = c.resample(BoundaryMode::Periodic, 4);
    assert_eq!(big.get(0, [3, 2]), Vec2::new(1.0, 2.0));
    assert_eq!(big.get(0, [2, 1]), Vec2::zeros());
    let mut z = Corrector::zeros(1, BoundaryMode::ZeroBoundary, 2);
    z.set(0, [1, 1], Vec2::new(3.0, 0.0));
    let e = z.resample(BoundaryMode::ZeroBoundary, 3);
    assert_eq!(e.get(0, [1, 1]), Vec2::new(3.0, 0.0));
    assert_eq!(e.value(&NodeRef::new(0, [-1, 1])), Vec2::zeros());
    assert_eq!(c.value(&NodeRef::new(0, [-1, 2])), Vec2::new(1.0, 2.0));
}

#[test]
fn invalid_queries() {
    let mut q = DensityQuery::new(Mat2::identity());
    q.k_schedule = vec![];
    assert!(q.validate().is_err());
    q.k_schedule = vec![2, 1];
    assert!(q.validate().is_err());
    q.k_schedule = vec![1];
    q.optimizer.smoothing_tau = 0.0;
    assert!(q.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn frame_indifference_with_rotated_seed(angle in 0.0..2.0 * PI, a in 0.7..1.3f64, b in -0.3..0.3f64) {
        let spec = lat("kagome");
        let lambda = Mat2::new(a, b, 0.1, 1.0);
        let cfg = OptimizerConfig::with_seeds(0, 1);
        let base = solve_cell_problem(&spec, &lambda, &cfg, 1, BoundaryMode::Periodic, &[]).unwrap();
        let r = rotation(angle);
        let seed = Start { label: "rotated".into(), corrector: base.corrector.mapped(&r) };
        let rot = solve_cell_problem(&spec, &(r * lambda), &cfg, 1, BoundaryMode::Periodic, &[seed]).unwrap();
        prop_assert!(rot.value_exact <= base.value_exact + 1e-8);
    }

    #[test]
    fn translation_of_corrector_leaves_objective(dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let spec = lat("square-long-range");
        let cell = assemble_supercell(&spec, 2, BoundaryMode::Periodic, false).unwrap();
        let e = cell.objective(&spec, &Mat2::new(1.1, 0.3, 0.0, 0.9)).unwrap();
        let pf = PenaltyFunction::exact(spec.eta());
        let x: Vec<f64> = (0..cell.num_variables()).map(|i| 0.1 * (i as f64).sin()).collect();
        let shifted = cell.variables(&cell.corrector(&x).shifted(Vec2::new(dx, dy)));
        let (v0, v1) = (e.value(&x, &pf).unwrap(), e.value(&shifted, &pf).unwrap());
        prop_assert!((v0 - v1).abs() <= 1e-12 * (1.0 + v0.abs()));
    }

    #[test]
    fn estimate_never_exceeds_zero_corrector(a in 0.5..2.0f64, b in -0.5..0.5f64) {
        let spec = lat("square");
        let lambda = Mat2::new(a, b, -b, 1.0);
        let e = solve_cell_problem(&spec, &lambda, &OptimizerConfig::with_seeds(1, 1), 2, BoundaryMode::ZeroBoundary, &[]).unwrap();
        prop_assert!(e.value_exact <= e.value_zero);
        prop_assert!(e.value_exact >= 0.0);
    }
}
