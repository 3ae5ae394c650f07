//! Constructive polygon and cell energy bounds, and audits of them on random
//! deformations.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::energy::{cell_energy, penalty_weight, PenaltyFunction};
use crate::error::{invalid, Error, Result};
use crate::geometry::{columns, is_strictly_convex, singular_values, triangle_area, Mat2, Vec2};
use crate::lattice::{cell_range, Cell, LatticeSpec, NodeRef, Vertex, WeightedPolygon};
use crate::linearize::{l2_gradient_norm, linearize_cells, triangle_gradient, FnField, NodalField, Region};

/// `sum_i (|u_{i+1} - u_i| - |x_{i+1} - x_i|)^2` along the open chain `x_1 .. x_n`.
pub fn chain_energy(x: &[Vec2], u: &[Vec2]) -> Result<f64> {
    if x.len() < 3 || x.len() != u.len() {
        return Err(invalid(format!("a polygon needs at least 3 vertices with values, got {}", x.len())));
    }
    Ok(x.windows(2)
        .zip(u.windows(2))
        .map(|(x, u)| {
            let d = (u[1] - u[0]).norm() - (x[1] - x[0]).norm();
            d * d
        })
        .sum())
}

/// Polygon energy of a field on the lattice polygon with vertices `vertices`.
pub fn polygon_energy(field: &impl NodalField, spec: &LatticeSpec, vertices: &[NodeRef]) -> Result<f64> {
    let eps = field.epsilon();
    let x: Vec<Vec2> = vertices.iter().map(|r| spec.position(r) * eps).collect();
    let u = vertices.iter().map(|r| field.value(spec, r)).collect::<Result<Vec<_>>>()?;
    chain_energy(&x, &u)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleConstants {
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub area: f64,
}

/// Constants for the triangle with spring chain `a - b - c`.
pub fn triangle_bound_constants(a: Vec2, b: Vec2, c: Vec2) -> Result<TriangleConstants> {
    let area = triangle_area(a, b, c);
    let scale = (a - b).norm_squared().max((b - c).norm_squared()).max((a - c).norm_squared());
    if !(area > 1e-12 * scale) {
        return Err(Error::DegenerateTriangle(format!("{:?}, {:?}, {:?}", a, b, c)));
    }
    let (smax, smin) = singular_values(&columns(a - b, b - c));
    let alpha = 1.0 / (smax * smax);
    let beta = 1.0 / (smin * smin);
    let sides = (a - b).norm_squared() + (b - c).norm_squared();
    Ok(TriangleConstants {
        alpha,
        beta,
        c1: (1.0 / (alpha * area)).max(sides / area),
        c2: 1.0 / (2.0 * beta * area),
        c3: 2.0 * sides / area,
        area,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub area: f64,
    /// Constants of the fan triangles `A1 A_i A_{i+1}`.
    pub triangles: Vec<TriangleConstants>,
    /// `6 M^2` of each inductive step.
    pub gammas: Vec<f64>,
}

/// Constants for a convex polygon `A1 .. An`, fan-triangulated from `A1`.
pub fn polygon_bound_constants(vertices: &[Vec2]) -> Result<PolygonConstants> {
    if vertices.len() < 3 {
        return Err(invalid("a polygon needs at least 3 vertices"));
    }
    if !is_strictly_convex(vertices) {
        return Err(invalid(format!("polygon {:?} is not strictly convex", vertices)));
    }
    fan_constants(vertices)
}

fn fan_constants(v: &[Vec2]) -> Result<PolygonConstants> {
    let t = triangle_bound_constants(v[0], v[1], v[2])?;
    if v.len() == 3 {
        return Ok(PolygonConstants { c1: t.c1, c2: t.c2, c3: t.c3, area: t.area, triangles: vec![t], gammas: vec![] });
    }
    let mut rest_vertices = vec![v[0]];
    rest_vertices.extend_from_slice(&v[2..]);
    let rest = fan_constants(&rest_vertices)?;
    let m = (v[0] - v[1]).norm().max((v[1] - v[2]).norm());
    let gamma = 6.0 * m * m;
    let area = t.area + rest.area;
    let mut triangles = vec![t];
    triangles.extend(rest.triangles);
    let mut gammas = vec![gamma];
    gammas.extend(rest.gammas);
    Ok(PolygonConstants {
        c1: t.c1.max(rest.c1),
        c2: (t.c2 / 2.0).min(rest.c2 / 6.0),
        c3: (t.c3 * t.area / 2.0 + rest.c3 * rest.area / 6.0 + gamma / 2.0) / area,
        area,
        triangles,
        gammas,
    })
}

/// Fan triangles of a polygon's vertex chain.
fn fan(vertices: &[NodeRef]) -> Vec<[NodeRef; 3]> {
    (1..vertices.len() - 1).map(|i| [vertices[0], vertices[i], vertices[i + 1]]).collect()
}

/// Mesh triangle (cell, index) with the given node vertices.
fn find_mesh_triangle(spec: &LatticeSpec, tri: &[NodeRef; 3]) -> Option<(Cell, usize)> {
    let want: BTreeSet<NodeRef> = tri.iter().copied().collect();
    for (t, verts) in spec.triangles().iter().enumerate() {
        let nodes: Vec<NodeRef> = verts
            .iter()
            .filter_map(|v| match v {
                Vertex::Node(r) => Some(*r),
                Vertex::Ghost { .. } => None,
            })
            .collect();
        if nodes.len() != 3 {
            continue;
        }
        for r in &nodes {
            if r.basic != tri[0].basic {
                continue;
            }
            let shift = [tri[0].offset[0] - r.offset[0], tri[0].offset[1] - r.offset[1]];
            let got: BTreeSet<NodeRef> = nodes.iter().map(|n| n.shifted(shift)).collect();
            if got == want {
                return Some((shift, t));
            }
        }
    }
    None
}

fn same_edge(a: [NodeRef; 2], b: [NodeRef; 2]) -> bool {
    a == b || (a[0] == b[1] && a[1] == b[0])
}

/// A decomposition polygon with its constants and mesh triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonBound {
    pub polygon: WeightedPolygon,
    pub constants: PolygonConstants,
    pub mesh_triangles: Vec<(Cell, usize)>,
}

/// Cell-level constants: `E(u, U) <= C1 (|grad u|^2_{U_n} + |U_n|)` and
/// `E(u, U) >= max{C2 (|grad u|^2_U - D2 |U|), 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub d2: f64,
    /// Ceiling `sum of penalty weights / eta` of the penalty energy.
    pub penalty_ceiling: f64,
    pub upper: Vec<PolygonBound>,
    pub lower: Vec<PolygonBound>,
    /// Gradient coefficient per mesh triangle in the upper bound.
    pub upper_coefficients: BTreeMap<(Cell, usize), f64>,
    pub upper_constant: f64,
    /// Gradient coefficient per cell-0 triangle in the lower bound.
    pub lower_coefficients: Vec<f64>,
    pub lower_constant: f64,
    pub expanded_area: f64,
}

fn polygon_bounds(spec: &LatticeSpec, polys: &[WeightedPolygon]) -> Result<Vec<PolygonBound>> {
    polys
        .iter()
        .map(|p| {
            if !(p.weight > 0.0) {
                return Err(invalid("decomposition weights must be positive"));
            }
            let x: Vec<Vec2> = p.vertices.iter().map(|r| spec.position(r)).collect();
            let constants = polygon_bound_constants(&x)?;
            let mesh_triangles = fan(&p.vertices)
                .iter()
                .map(|t| {
                    find_mesh_triangle(spec, t)
                        .ok_or_else(|| invalid(format!("fan triangle {}, {}, {} is not a mesh triangle", t[0], t[1], t[2])))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PolygonBound { polygon: p.clone(), constants, mesh_triangles })
        })
        .collect()
}

fn chain_edges(p: &WeightedPolygon) -> impl Iterator<Item = [NodeRef; 2]> + '_ {
    p.vertices.windows(2).map(|w| [w[0], w[1]])
}

/// Assembles the cell constants from the lattice's registered decomposition.
pub fn cell_bound_constants(spec: &LatticeSpec) -> Result<BoundConstants> {
    let dec = spec.decomposition().ok_or_else(|| Error::NoDecomposition(spec.name().to_string()))?;
    if !spec.angles().is_empty() {
        return Err(invalid("angle terms are not covered by the constructive upper bound"));
    }
    let upper = polygon_bounds(spec, &dec.upper)?;
    let lower = polygon_bounds(spec, &dec.lower)?;
    let springs = spec.springs();
    let mut pathed = vec![false; springs.len()];
    for path in &dec.paths {
        let s = springs
            .get(path.spring)
            .ok_or_else(|| invalid(format!("path refers to spring {} of {}", path.spring, springs.len())))?;
        if path.legs.is_empty() || path.legs[0].from != s.ends[0] || path.legs.last().map(|l| l.to) != Some(s.ends[1]) {
            return Err(invalid(format!("path for spring {} does not join its ends", path.spring)));
        }
        if path.legs.windows(2).any(|w| w[0].to != w[1].from) {
            return Err(invalid(format!("path for spring {} is not connected", path.spring)));
        }
        for leg in &path.legs {
            let tri = spec
                .triangles()
                .get(leg.triangle)
                .ok_or_else(|| invalid(format!("path leg refers to triangle {}", leg.triangle)))?;
            let on = |r: NodeRef| tri.iter().any(|v| matches!(v, Vertex::Node(n) if n.shifted(leg.cell) == r));
            if !on(leg.from) || !on(leg.to) {
                return Err(invalid(format!("path leg {} -> {} is not an edge of its triangle", leg.from, leg.to)));
            }
        }
        pathed[path.spring] = true;
    }
    for (i, s) in springs.iter().enumerate() {
        if pathed[i] {
            continue;
        }
        let cover: f64 = upper
            .iter()
            .map(|p| p.polygon.weight * chain_edges(&p.polygon).filter(|e| same_edge(*e, s.ends)).count() as f64)
            .sum();
        if cover < s.weight * s.stiffness * (1.0 - 1e-12) {
            return Err(invalid(format!("upper decomposition under-counts spring {i}")));
        }
    }
    let mut used = vec![0.0; springs.len()];
    for p in &lower {
        for e in chain_edges(&p.polygon) {
            let i = springs
                .iter()
                .position(|s| same_edge(e, s.ends))
                .ok_or_else(|| invalid(format!("lower polygon edge {} - {} is not a spring of the cell", e[0], e[1])))?;
            used[i] += p.polygon.weight;
        }
    }
    for (i, s) in springs.iter().enumerate() {
        if used[i] > s.weight * s.stiffness * (1.0 + 1e-12) {
            return Err(invalid(format!("lower decomposition over-counts spring {i}")));
        }
    }

    let n = spec.reach().n;
    let in_un = |c: &Cell| c[0].abs() < n as i64 && c[1].abs() < n as i64;
    let geometry = spec.triangle_geometry();
    let mut coef: BTreeMap<(Cell, usize), f64> = BTreeMap::new();
    let mut constant = 0.0;
    for p in &upper {
        let w = p.polygon.weight * p.constants.c1;
        for id in &p.mesh_triangles {
            if !in_un(&id.0) {
                return Err(invalid(format!("upper polygon triangle in cell {:?} lies outside U_n", id.0)));
            }
            *coef.entry(*id).or_insert(0.0) += w;
        }
        constant += w * p.constants.area;
    }
    for path in &dec.paths {
        let s = &springs[path.spring];
        let wk = s.weight * s.stiffness;
        let l = path.legs.len() as f64;
        for leg in &path.legs {
            if !in_un(&leg.cell) {
                return Err(invalid(format!("path leg in cell {:?} lies outside U_n", leg.cell)));
            }
            let g = geometry[leg.triangle];
            let len2 = (spec.position(&leg.to) - spec.position(&leg.from)).norm_squared();
            *coef.entry((leg.cell, leg.triangle)).or_insert(0.0) += wk * l * len2 / triangle_area(g[0], g[1], g[2]);
        }
        constant += wk * s.rest_length * s.rest_length;
    }
    let penalty_ceiling: f64 = spec.penalty_triangles().iter().map(|&t| penalty_weight(spec, t)).sum::<f64>() / spec.eta();
    constant += penalty_ceiling;
    let expanded_area = ((2 * n - 1) * (2 * n - 1)) as f64 * spec.cell_area();
    let amax = coef.values().fold(0.0f64, |a, b| a.max(*b));
    let c1 = amax.max(constant / expanded_area);

    let mut lower_coefficients = vec![0.0; spec.triangles().len()];
    let mut lower_constant = 0.0;
    for p in &lower {
        for (cell, t) in &p.mesh_triangles {
            if *cell == [0, 0] {
                lower_coefficients[*t] += p.polygon.weight * p.constants.c2;
            }
        }
        lower_constant += p.polygon.weight * p.constants.c3 * p.constants.area;
    }
    if let Some(t) = lower_coefficients.iter().position(|g| *g <= 0.0) {
        return Err(invalid(format!("lower decomposition does not cover triangle {t}")));
    }
    let c2 = lower_coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    let d2 = lower_constant / (c2 * spec.cell_area());
    Ok(BoundConstants {
        c1,
        c2,
        d2,
        penalty_ceiling,
        upper,
        lower,
        upper_coefficients: coef,
        upper_constant: constant,
        lower_coefficients,
        lower_constant,
        expanded_area,
    })
}

/// Outcome of checking an inequality on random samples.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub object: String,
    pub inequality: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen (for a lower bound, `lhs - rhs`).
    pub worst_margin: f64,
}

impl AuditReport {
    fn new(object: impl Into<String>, inequality: impl Into<String>) -> Self {
        AuditReport { object: object.into(), inequality: inequality.into(), samples: 0, violations: 0, worst_margin: f64::INFINITY }
    }

    /// Records `small <= big`.
    fn record(&mut self, small: f64, big: f64) {
        self.samples += 1;
        let margin = big - small;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -1e-12 * (1.0 + small.abs() + big.abs()) {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random affine-plus-noise sampler: `lambda x + sigma N(0, 1)` with `lambda`
/// uniform in the Frobenius ball of radius 3 and `sigma` cycling through 0, 0.1, 1.
pub struct DeformationSampler {
    rng: ChaCha8Rng,
    count: usize,
}

impl DeformationSampler {
    pub fn new(seed: u64) -> Self {
        DeformationSampler { rng: ChaCha8Rng::seed_from_u64(seed), count: 0 }
    }

    pub fn gradient(&mut self) -> Mat2 {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut self.rng));
        let m = Mat2::new(g[0], g[1], g[2], g[3]);
        let r = 3.0 * self.rng.random::<f64>().powf(0.25);
        if m.norm() == 0.0 {
            Mat2::zeros()
        } else {
            m * (r / m.norm())
        }
    }

    /// Next `(lambda, sigma)` pair.
    pub fn next_parameters(&mut self) -> (Mat2, f64) {
        let sigma = [0.0, 0.1, 1.0][self.count % 3];
        self.count += 1;
        (self.gradient(), sigma)
    }

    pub fn noise(&mut self, sigma: f64) -> Vec2 {
        let n = Normal::new(0.0, sigma).expect("finite sigma");
        Vec2::new(n.sample(&mut self.rng), n.sample(&mut self.rng))
    }

    /// Values `lambda x + noise` at the given points.
    pub fn sample(&mut self, x: &[Vec2]) -> Vec<Vec2> {
        let (lambda, sigma) = self.next_parameters();
        x.iter().map(|p| lambda * p + self.noise(sigma)).collect()
    }
}

fn fan_gradient_norm(x: &[Vec2], u: &[Vec2]) -> Result<f64> {
    let mut s = 0.0;
    for i in 1..x.len() - 1 {
        let tx = [x[0], x[i], x[i + 1]];
        let g = triangle_gradient(&tx, &[u[0], u[i], u[i + 1]])?;
        s += g.norm_squared() * triangle_area(tx[0], tx[1], tx[2]);
    }
    Ok(s)
}

/// Checks the polygon upper and lower bounds on random deformations.
pub fn audit_polygon(name: &str, x: &[Vec2], samples: usize, seed: u64) -> Result<[AuditReport; 2]> {
    let k = polygon_bound_constants(x)?;
    let mut up = AuditReport::new(name, "polygon upper");
    let mut lo = AuditReport::new(name, "polygon lower");
    let mut sampler = DeformationSampler::new(seed);
    for _ in 0..samples {
        let u = sampler.sample(x);
        let e = chain_energy(x, &u)?;
        let g = fan_gradient_norm(x, &u)?;
        up.record(e, k.c1 * (g + k.area));
        lo.record(k.c2 * g - k.c3 * k.area, e);
    }
    Ok([up, lo])
}

/// Checks `E_AC <= 3 (gamma + E_AB + E_BC)` with `gamma = 6 max(|AB|, |BC|)^2`.
pub fn audit_third_spring(name: &str, tri: [Vec2; 3], samples: usize, seed: u64) -> AuditReport {
    let [a, b, c] = tri;
    let m = (a - b).norm().max((b - c).norm());
    let gamma = 6.0 * m * m;
    let spring = |p: Vec2, q: Vec2, up: Vec2, uq: Vec2| {
        let d = (uq - up).norm() - (q - p).norm();
        d * d
    };
    let mut rep = AuditReport::new(name, "third spring");
    let mut sampler = DeformationSampler::new(seed);
    for _ in 0..samples {
        let u = sampler.sample(&tri);
        let eac = spring(a, c, u[0], u[2]);
        let rhs = 3.0 * (gamma + spring(a, b, u[0], u[1]) + spring(b, c, u[1], u[2]));
        rep.record(eac, rhs);
    }
    rep
}

/// Checks the cell upper and lower bounds on random nodal deformations.
pub fn audit_cell_bounds(spec: &LatticeSpec, bounds: &BoundConstants, samples: usize, seed: u64) -> Result<[AuditReport; 2]> {
    let n = spec.reach().n as i64;
    let un: Vec<Cell> = cell_range(n - 1).collect();
    let nodes: Vec<NodeRef> = spec.window_support(&un).into_iter().collect();
    let pf = PenaltyFunction::exact(spec.eta());
    let mut up = AuditReport::new(spec.name(), "cell upper");
    let mut lo = AuditReport::new(spec.name(), "cell lower");
    let mut sampler = DeformationSampler::new(seed);
    let area = spec.cell_area();
    for _ in 0..samples {
        let (lambda, sigma) = sampler.next_parameters();
        let values: BTreeMap<NodeRef, Vec2> =
            nodes.iter().map(|r| (*r, lambda * spec.position(r) + sampler.noise(sigma))).collect();
        let field = FnField { epsilon: 1.0, f: |r: &NodeRef| values.get(r).copied().unwrap_or_else(Vec2::zeros) };
        let e = cell_energy(&field, spec, &pf, [0, 0])?.total;
        let lin = linearize_cells(&field, spec, &un)?;
        let g_un = l2_gradient_norm(&lin, Region::All)?;
        let g_u = l2_gradient_norm(&lin, Region::Cells(&[[0, 0]]))?;
        up.record(e, bounds.c1 * (g_un + bounds.expanded_area));
        lo.record((bounds.c2 * (g_u - bounds.d2 * area)).max(0.0), e);
    }
    Ok([up, lo])
}

/// Every audit for one lattice: polygon bounds and the third-spring inequality
/// for each decomposition polygon, and the cell bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsAudit {
    pub bounds: BoundConstants,
    pub reports: Vec<AuditReport>,
}

impl BoundsAudit {
    pub fn violations(&self) -> usize {
        self.reports.iter().map(|r| r.violations).sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["object", "inequality", "samples", "violations", "worst_margin"])?;
        for r in &self.reports {
            out.write_record([
                r.object.clone(),
                r.inequality.clone(),
                r.samples.to_string(),
                r.violations.to_string(),
                r.worst_margin.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let b = &self.bounds;
        let mut s = format!(
            "C1 {}\nC2 {}\nD2 {}\npenalty ceiling {}\n",
            b.c1, b.c2, b.d2, b.penalty_ceiling
        );
        for (kind, list) in [("upper", &b.upper), ("lower", &b.lower)] {
            for p in list {
                let names: Vec<String> = p.polygon.vertices.iter().map(|r| r.to_string()).collect();
                s += &format!(
                    "{kind} polygon {} weight {}: c1 {}, c2 {}, c3 {}, area {}\n",
                    names.join(" "),
                    p.polygon.weight,
                    p.constants.c1,
                    p.constants.c2,
                    p.constants.c3,
                    p.constants.area
                );
            }
        }
        s += &format!("{} checks, {} violations\n", self.reports.len(), self.violations());
        s
    }
}

pub fn bounds_audit(spec: &LatticeSpec, samples: usize, seed: u64) -> Result<BoundsAudit> {
    let bounds = cell_bound_constants(spec)?;
    let mut reports = Vec::new();
    let mut seen: Vec<Vec<NodeRef>> = Vec::new();
    let mut s = seed;
    for (kind, p) in bounds.upper.iter().map(|p| ("upper", p)).chain(bounds.lower.iter().map(|p| ("lower", p))) {
        if seen.contains(&p.polygon.vertices) {
            continue;
        }
        seen.push(p.polygon.vertices.clone());
        let name = format!(
            "{} {} polygon {}",
            spec.name(),
            kind,
            p.polygon.vertices.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
        );
        let x: Vec<Vec2> = p.polygon.vertices.iter().map(|r| spec.position(r)).collect();
        reports.extend(audit_polygon(&name, &x, samples, s)?);
        s += 1;
        for i in 1..x.len() - 1 {
            reports.push(audit_third_spring(&format!("{name} fan {i}"), [x[0], x[i], x[i + 1]], samples, s));
            s += 1;
        }
    }
    reports.extend(audit_cell_bounds(spec, &bounds, samples, s)?);
    Ok(BoundsAudit { bounds, reports })
}
