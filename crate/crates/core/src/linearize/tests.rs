use proptest::prelude::*;

use super::*;
use crate::geometry::rotation;
use crate::lattice::{catalog, GhostDescription, Vertex};

fn square() -> LatticeSpec {
    LatticeSpec::from_catalog("square").unwrap()
}

fn ghost_square() -> LatticeSpec {
    let o = NodeRef::new(0, [0, 0]);
    let a = NodeRef::new(0, [1, 0]);
    let b = NodeRef::new(0, [0, 1]);
    let c = NodeRef::new(0, [1, 1]);
    let g = Vertex::Ghost { ghost: 0 };
    let mut d = square().description().clone();
    d.ghosts = vec![GhostDescription { sources: vec![(0.5, o), (0.5, c)] }];
    d.triangles = vec![
        [Vertex::Node(o), Vertex::Node(a), g],
        [Vertex::Node(a), Vertex::Node(c), g],
        [Vertex::Node(c), Vertex::Node(b), g],
        [Vertex::Node(b), Vertex::Node(o), g],
    ];
    d.penalty_triangles = vec![0, 1, 2, 3];
    d.decomposition = None;
    LatticeSpec::build(d).unwrap()
}

fn unit_window() -> CellSet {
    CellSet::new(vec![[0, 0], [1, 0], [0, 1], [1, 1]], 1.0)
}

#[test]
fn affine_fields_are_reproduced() {
    for e in catalog() {
        let w = CellSet::new(vec![[0, 0], [1, -1], [2, 3]], 0.5);
        let def = sample_at_nodes(|x| x * 2.0, &w, &e.spec);
        let field = linearize(&def, &e.spec).unwrap();
        for p in field.pieces() {
            assert!((p.gradient - Mat2::identity() * 2.0).norm() < 1e-13, "{}", e.name);
            assert!(p.offset.norm() < 1e-13);
        }
        let def = sample_at_nodes(|_| Vec2::new(3.0, -1.0), &w, &e.spec);
        let field = linearize(&def, &e.spec).unwrap();
        assert!(field.pieces().iter().all(|p| p.gradient.norm() == 0.0));
        assert_eq!(l2_gradient_norm(&field, Region::All).unwrap(), 0.0);
    }
}

#[test]
fn ghost_vertex_takes_its_convex_value() {
    let spec = ghost_square();
    let field = FnField {
        epsilon: 1.0,
        f: |r: &NodeRef| if r.offset == [1, 1] { Vec2::new(2.0, 0.0) } else { Vec2::zeros() },
    };
    let lin = linearize_cells(&field, &spec, &[[0, 0]]).unwrap();
    let centre = spec.vertex_position(&Vertex::Ghost { ghost: 0 }, [0, 0]);
    for p in lin.pieces() {
        assert!((p.eval(centre) - Vec2::new(1.0, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn missing_values_are_reported() {
    let def = Deformation::new(unit_window());
    assert!(matches!(linearize(&def, &square()), Err(Error::MissingValue(_))));
    let def = Deformation::new(unit_window()).with_extension(ExtensionRule::Zero);
    assert!(linearize(&def, &square()).is_ok());
}

#[test]
fn affine_extension_fills_unstored_nodes() {
    let lambda = Mat2::new(1.0, 2.0, 0.0, 1.0);
    let def = Deformation::new(unit_window())
        .with_extension(ExtensionRule::Affine { lambda, offset: Vec2::new(1.0, 1.0) });
    let field = linearize(&def, &square()).unwrap();
    for p in field.pieces() {
        assert!((p.gradient - lambda).norm() < 1e-14);
    }
}

#[test]
fn gradient_examples() {
    let x = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
    let g = triangle_gradient(&x, &[Vec2::zeros(), Vec2::new(2.0, 0.0), Vec2::new(0.0, 3.0)]).unwrap();
    assert_eq!(g, Mat2::new(2.0, 0.0, 0.0, 3.0));
    let r = rotation(0.7);
    let g = triangle_gradient(&x, &[r * x[0], r * x[1], r * x[2]]).unwrap();
    assert!((g - r).norm() < 1e-15);
    let flat = [Vec2::zeros(), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)];
    assert!(matches!(triangle_gradient(&flat, &x), Err(Error::DegenerateTriangle(_))));
}

#[test]
fn l2_norm_examples() {
    let lambda = Mat2::new(1.0, -2.0, 0.5, 3.0);
    let spec = square();
    let def = sample_at_nodes(|x| lambda * x, &CellSet::new(vec![[0, 0]], 1.0), &spec);
    let field = linearize(&def, &spec).unwrap();
    let v = l2_gradient_norm(&field, Region::Cells(&[[0, 0]])).unwrap();
    assert!((v - lambda.norm_squared()).abs() < 1e-13);
    assert!(l2_gradient_norm(&field, Region::Cells(&[[5, 5]])).is_err());

    // two triangles with different gradients
    let field = FnField { epsilon: 1.0, f: |r: &NodeRef| if r.offset == [1, 0] { Vec2::new(1.0, 0.0) } else { Vec2::zeros() } };
    let lin = linearize_cells(&field, &spec, &[[0, 0]]).unwrap();
    let g0 = lin.pieces()[0].gradient;
    let g1 = lin.pieces()[1].gradient;
    let want = 0.5 * g0.norm_squared() + 0.5 * g1.norm_squared();
    assert!((l2_gradient_norm(&lin, Region::All).unwrap() - want).abs() < 1e-15);
    let ids = [TriangleId { cell: [0, 0], triangle: 1 }];
    assert!((l2_gradient_norm(&lin, Region::Triangles(&ids)).unwrap() - 0.5 * g1.norm_squared()).abs() < 1e-15);
}

#[test]
fn identity_sampling() {
    let spec = LatticeSpec::from_catalog("kagome").unwrap();
    let w = CellSet::new(vec![[0, 0]], 0.25);
    let def = sample_at_nodes(|x| x, &w, &spec);
    for (r, v) in &def.values {
        assert_eq!(*v, spec.position(r) * 0.25);
    }
}

#[test]
fn field_csv_has_one_row_per_triangle() {
    let spec = LatticeSpec::from_catalog("kagome").unwrap();
    let def = sample_at_nodes(|x| x, &CellSet::new(vec![[0, 0], [0, 1]], 1.0), &spec);
    let field = linearize(&def, &spec).unwrap();
    let mut buf = Vec::new();
    field.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 12);
}

#[test]
fn interpolation_of_affine_and_constant() {
    let spec = LatticeSpec::from_catalog("kagome").unwrap();
    let omega = Domain::square(2.0);
    let lambda = Mat2::new(0.3, -0.4, 0.8, 0.1);
    let lip = crate::geometry::spectral_norm(&lambda);
    let rep = interpolation_estimate_report(|x| lambda * x + Vec2::new(1.0, 2.0), lip, &spec, &omega, &[0.25, 0.125])
        .unwrap();
    for r in &rep.rows {
        assert!(r.gradient_ratio <= 1.0 + 1e-12);
        assert!(r.error_ratio < 1e-12);
    }
    let rep = interpolation_estimate_report(|_| Vec2::new(1.0, 2.0), 0.0, &spec, &omega, &[0.25]).unwrap();
    assert_eq!(rep.rows[0].error_ratio, 0.0);
}

#[test]
fn interpolation_constants_do_not_grow() {
    let spec = LatticeSpec::from_catalog("kagome").unwrap();
    let omega = Domain::rect([-1.0, -1.0], [1.0, 1.0]);
    let rep = interpolation_estimate_report(|x| Vec2::new(x.x.abs(), 0.0), 1.0, &spec, &omega, &[0.25, 0.125, 0.0625])
        .unwrap();
    assert!(rep.gradient_slope.unwrap().abs() <= 0.1, "{:?}", rep);
    assert!(rep.error_slope.unwrap().abs() <= 0.1, "{:?}", rep);
}

fn arb_mat() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-3.0..3.0f64).prop_map(|a| Mat2::new(a[0], a[1], a[2], a[3]))
}

fn arb_vec() -> impl Strategy<Value = Vec2> {
    prop::array::uniform2(-3.0..3.0f64).prop_map(|a| Vec2::new(a[0], a[1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn affine_preservation(lambda in arb_mat(), c in arb_vec(), which in 0usize..4) {
        let spec = &catalog()[which].spec;
        let w = CellSet::new(vec![[0, 0], [-1, 2]], 0.5);
        let def = sample_at_nodes(|x| lambda * x + c, &w, spec);
        let field = linearize(&def, spec).unwrap();
        let scale = lambda.norm().max(1.0);
        for p in field.pieces() {
            prop_assert!((p.gradient - lambda).norm() <= 1e-12 * scale);
            prop_assert!((p.offset - c).norm() <= 1e-12 * scale.max(c.norm()));
        }
    }

    #[test]
    fn sampled_gradient_recovers_lambda(lambda in arb_mat(), x0 in arb_vec(), x1 in arb_vec(), x2 in arb_vec()) {
        let x = [x0, x1, x2];
        prop_assume!(crate::geometry::triangle_area(x0, x1, x2) > 0.1);
        let g = triangle_gradient(&x, &[lambda * x0, lambda * x1, lambda * x2]).unwrap();
        prop_assert!((g - lambda).norm() <= 1e-12 * lambda.norm().max(1.0) * 100.0);
    }

    #[test]
    fn scaling_covariance(vals in prop::collection::vec(arb_vec(), 64), which in 0usize..4, k in 1u32..5) {
        let spec = &catalog()[which].spec;
        let eps = 0.5f64.powi(k as i32);
        let hash = |r: &NodeRef| ((r.basic as i64 * 7 + r.offset[0] * 3 + r.offset[1] * 5).rem_euclid(64)) as usize;
        let unit = FnField { epsilon: 1.0, f: |r: &NodeRef| vals[hash(r)] };
        let scaled = FnField { epsilon: eps, f: |r: &NodeRef| vals[hash(r)] * eps };
        let cells = [[0, 0], [1, 2]];
        let a = linearize_cells(&unit, spec, &cells).unwrap();
        let b = linearize_cells(&scaled, spec, &cells).unwrap();
        for (p, q) in a.pieces().iter().zip(b.pieces()) {
            let scale = p.gradient.norm().max(1.0);
            prop_assert!((p.gradient - q.gradient).norm() <= 1e-12 * scale);
            let x = (p.vertices[0] + p.vertices[1] + p.vertices[2]) / 3.0;
            prop_assert!((p.eval(x) * eps - q.eval(x * eps)).norm() <= 1e-12 * scale * (1.0 + x.norm()));
        }
    }

    #[test]
    fn triangle_order_is_irrelevant(vals in prop::collection::vec(arb_vec(), 32), which in 0usize..4, rot in 0usize..3) {
        let spec = &catalog()[which].spec;
        let mut d = spec.description().clone();
        d.triangles.reverse();
        for t in d.triangles.iter_mut() {
            t.rotate_left(rot);
        }
        let n = d.triangles.len();
        d.penalty_triangles = d.penalty_triangles.iter().map(|t| n - 1 - t).collect();
        let reordered = LatticeSpec::build(d).unwrap();
        let f = FnField { epsilon: 1.0, f: |r: &NodeRef| vals[((r.basic as i64 + r.offset[0] * 5 + r.offset[1] * 11).rem_euclid(32)) as usize] };
        let a = linearize_cells(&f, spec, &[[0, 0]]).unwrap();
        let b = linearize_cells(&f, &reordered, &[[0, 0]]).unwrap();
        for p in a.pieces() {
            let x = (p.vertices[0] + p.vertices[1] + p.vertices[2]) / 3.0;
            let q = b.pieces().iter().find(|q| {
                let y = (q.vertices[0] + q.vertices[1] + q.vertices[2]) / 3.0;
                (x - y).norm() < 1e-12
            }).unwrap();
            prop_assert!((p.gradient - q.gradient).norm() <= 1e-12 * p.gradient.norm().max(1.0));
        }
    }
}
