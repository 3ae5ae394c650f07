//! Periodic lattice specifications, node/cell index arithmetic, expanded cells
//! and the cell sets counted inside a domain.

mod catalog;
mod file;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, columns, convex_inner_distance, Domain, Mat2, Vec2};

pub use catalog::{catalog, catalog_names, CatalogEntry};
pub use file::{
    AngleDescription, GhostDescription, LatticeDescription, SpringDescription,
};

/// Integer cell offset.
pub type Cell = [i64; 2];

#[inline]
pub fn cell_add(a: Cell, b: Cell) -> Cell {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn cell_sub(a: Cell, b: Cell) -> Cell {
    [a[0] - b[0], a[1] - b[1]]
}

/// All offsets in the square `[-r, r]^2`, row-major.
pub fn cell_range(r: i64) -> impl Iterator<Item = Cell> {
    (-r..=r).flat_map(move |i| (-r..=r).map(move |j| [i, j]))
}

/// A lattice node: basic node `basic` translated by `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, Cell)", into = "(usize, Cell)")]
pub struct NodeRef {
    pub basic: usize,
    pub offset: Cell,
}

impl NodeRef {
    pub const fn new(basic: usize, offset: Cell) -> Self {
        NodeRef { basic, offset }
    }

    pub fn shifted(self, by: Cell) -> Self {
        NodeRef { basic: self.basic, offset: cell_add(self.offset, by) }
    }
}

impl From<(usize, Cell)> for NodeRef {
    fn from((basic, offset): (usize, Cell)) -> Self {
        NodeRef { basic, offset }
    }
}

impl From<NodeRef> for (usize, Cell) {
    fn from(r: NodeRef) -> Self {
        (r.basic, r.offset)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, [{}, {}]]", self.basic, self.offset[0], self.offset[1])
    }
}

/// A triangulation vertex: a lattice node or a ghost vertex of the reference cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vertex {
    Node(NodeRef),
    Ghost { ghost: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GhostRule {
    pub sources: Vec<(f64, NodeRef)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpringTerm {
    pub ends: [NodeRef; 2],
    pub rest_length: f64,
    pub stiffness: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleForm {
    AbsoluteCosine,
    Torsional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleTerm {
    pub apex: NodeRef,
    pub arms: [NodeRef; 2],
    pub preferred_cosine: f64,
    pub strength: f64,
    pub form: AngleForm,
}

impl AngleTerm {
    pub fn preferred_angle(&self) -> f64 {
        self.preferred_cosine.clamp(-1.0, 1.0).acos()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyWeighting {
    #[default]
    Unweighted,
    AreaWeighted,
}

/// Reach of the energy (`n`) and of the linearization (`m`), with `d_m = diam(U_m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reach {
    pub n: usize,
    pub m: usize,
    pub d_m: f64,
}

/// Offsets of the cells `eps*U + alpha` counted in a domain, sorted lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    pub offsets: Vec<Cell>,
    pub epsilon: f64,
}

impl CellSet {
    pub fn new(mut offsets: Vec<Cell>, epsilon: f64) -> Self {
        offsets.sort_unstable();
        offsets.dedup();
        CellSet { offsets, epsilon }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, c: &Cell) -> bool {
        self.offsets.binary_search(c).is_ok()
    }
}

/// Polygon used in the bound decompositions; vertices follow the spring chain and
/// the fan is taken from the first vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPolygon {
    pub weight: f64,
    pub vertices: Vec<NodeRef>,
}

/// One leg of a path bounding a long spring: the segment `from -> to` lies in
/// triangle `triangle` of cell `cell`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLeg {
    pub from: NodeRef,
    pub to: NodeRef,
    pub triangle: usize,
    pub cell: Cell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringPath {
    pub spring: usize,
    pub legs: Vec<PathLeg>,
}

/// Polygon decompositions of the spring energy used for the cell bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub upper: Vec<WeightedPolygon>,
    pub lower: Vec<WeightedPolygon>,
    #[serde(default)]
    pub paths: Vec<SpringPath>,
}

/// Zero-energy families known for a lattice; used to seed the cell problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mechanism {
    /// Rigid bodies rotated alternately by `phi + theta` and `phi - theta`; each
    /// basic node is a hinge between the body with centroid `up_centroids[i]` and
    /// its point reflection through the node.
    AlternatingRotation { up_centroids: Vec<[f64; 2]> },
    /// Accordion folding of a square lattice along one axis.
    AccordionFold,
}

/// A validated periodic lattice. Immutable after [`LatticeSpec::build`].
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    desc: LatticeDescription,
    cell_vectors: [Vec2; 2],
    basis: Mat2,
    basis_inv: Mat2,
    cell_polygon: Vec<Vec2>,
    cell_area: f64,
    nodes: Vec<Vec2>,
    springs: Vec<SpringTerm>,
    angles: Vec<AngleTerm>,
    triangles: Vec<[Vertex; 3]>,
    triangle_geometry: Vec<[Vec2; 3]>,
    ghosts: Vec<GhostRule>,
    penalty_triangles: Vec<usize>,
    penalty_weighting: PenaltyWeighting,
    eta: f64,
    reach: Reach,
}

const GEOM_TOL: f64 = 1e-9;

impl LatticeSpec {
    /// Validates a description and builds the lattice.
    pub fn build(desc: LatticeDescription) -> Result<LatticeSpec> {
        if desc.dimension != 2 {
            return Err(Error::InvalidLattice(format!(
                "dimension {} is not supported (only 2)",
                desc.dimension
            )));
        }
        if desc.cell_vectors.len() != 2 {
            return Err(Error::InvalidLattice("expected 2 cell vectors".into()));
        }
        let v1 = Vec2::from(desc.cell_vectors[0]);
        let v2 = Vec2::from(desc.cell_vectors[1]);
        if !(v1.iter().chain(v2.iter()).all(|x| x.is_finite())) {
            return Err(Error::InvalidLattice("cell vectors must be finite".into()));
        }
        let basis = columns(v1, v2);
        let det = basis.determinant();
        if det.abs() <= 1e-12 * v1.norm() * v2.norm() || det == 0.0 {
            return Err(Error::DegenerateCell(det));
        }
        let basis_inv = basis.try_inverse().ok_or(Error::DegenerateCell(det))?;
        let cell_area = det.abs();

        let cell_polygon: Vec<Vec2> = match &desc.cell_polygon {
            Some(p) => geometry::ccw(&p.iter().map(|v| Vec2::from(*v)).collect::<Vec<_>>()),
            None => geometry::ccw(&[Vec2::zeros(), v1, v1 + v2, v2]),
        };
        validate_cell_polygon(&cell_polygon, cell_area, &basis)?;
        let cell_diam = geometry::diameter(&cell_polygon);

        if desc.nodes.is_empty() {
            return Err(Error::InvalidLattice("at least one basic node is required".into()));
        }
        let nodes: Vec<Vec2> = desc.nodes.iter().map(|p| Vec2::from(*p)).collect();
        if nodes.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidLattice("node coordinates must be finite".into()));
        }
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let f = basis_inv * (nodes[j] - nodes[i]);
                if (f.x - f.x.round()).abs() < GEOM_TOL && (f.y - f.y.round()).abs() < GEOM_TOL {
                    return Err(Error::DuplicateNode(i, j));
                }
            }
        }
        for (i, p) in nodes.iter().enumerate() {
            if convex_inner_distance(*p, &cell_polygon) < -GEOM_TOL * cell_diam {
                return Err(Error::InvalidLattice(format!("basic node {i} lies outside the unit cell")));
            }
        }

        let nb = nodes.len();
        let check = |r: &NodeRef| -> Result<()> {
            if r.basic >= nb {
                Err(Error::NodeOutOfRange { index: r.basic, len: nb })
            } else {
                Ok(())
            }
        };
        let pos = |r: &NodeRef| nodes[r.basic] + basis * Vec2::new(r.offset[0] as f64, r.offset[1] as f64);

        let mut ghosts = Vec::with_capacity(desc.ghosts.len());
        for (g, rule) in desc.ghosts.iter().enumerate() {
            if rule.sources.len() < 2 {
                return Err(Error::InvalidGhost(format!("ghost {g} needs at least two sources")));
            }
            let mut sum = 0.0;
            for (theta, r) in &rule.sources {
                check(r)?;
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::InvalidGhost(format!("ghost {g}: coefficient {theta} not in (0,1)")));
                }
                sum += theta;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGhost(format!("ghost {g}: coefficients sum to {sum}")));
            }
            ghosts.push(GhostRule { sources: rule.sources.clone() });
        }
        let ghost_pos = |g: usize| -> Vec2 {
            ghosts[g].sources.iter().fold(Vec2::zeros(), |acc, (t, r)| acc + pos(r) * *t)
        };

        if desc.triangles.is_empty() {
            return Err(Error::Triangulation("no triangles".into()));
        }
        let mut triangle_geometry = Vec::with_capacity(desc.triangles.len());
        for (t, tri) in desc.triangles.iter().enumerate() {
            let mut g = [Vec2::zeros(); 3];
            for (k, v) in tri.iter().enumerate() {
                g[k] = match v {
                    Vertex::Node(r) => {
                        check(r)?;
                        pos(r)
                    }
                    Vertex::Ghost { ghost } => {
                        if *ghost >= ghosts.len() {
                            return Err(Error::Triangulation(format!("triangle {t}: unknown ghost {ghost}")));
                        }
                        ghost_pos(*ghost)
                    }
                };
                if convex_inner_distance(g[k], &cell_polygon) < -GEOM_TOL * cell_diam {
                    return Err(Error::Triangulation(format!("triangle {t} leaves the unit cell")));
                }
            }
            if geometry::triangle_area(g[0], g[1], g[2]) < 1e-14 * cell_area {
                return Err(Error::Triangulation(format!("triangle {t} is degenerate")));
            }
            triangle_geometry.push(g);
        }
        for a in 0..triangle_geometry.len() {
            for b in a + 1..triangle_geometry.len() {
                if geometry::triangles_overlap(&triangle_geometry[a], &triangle_geometry[b], GEOM_TOL * cell_diam) {
                    return Err(Error::Triangulation(format!("triangles {a} and {b} overlap")));
                }
            }
        }
        let covered: f64 = triangle_geometry.iter().map(|g| geometry::triangle_area(g[0], g[1], g[2])).sum();
        if (covered - cell_area).abs() > GEOM_TOL * cell_area {
            return Err(Error::Triangulation(format!(
                "triangles cover area {covered} but the cell has area {cell_area}"
            )));
        }
        for (b, p) in nodes.iter().enumerate() {
            for o in cell_range(2) {
                let q = p + basis * Vec2::new(o[0] as f64, o[1] as f64);
                if convex_inner_distance(q, &cell_polygon) >= -GEOM_TOL * cell_diam
                    && !triangle_geometry
                        .iter()
                        .any(|g| g.iter().any(|x| (x - q).norm() < GEOM_TOL * cell_diam))
                {
                    return Err(Error::Triangulation(format!(
                        "node {} in the closed cell is not a triangulation vertex",
                        NodeRef::new(b, o)
                    )));
                }
            }
        }

        let mut springs = Vec::with_capacity(desc.springs.len());
        for (s, d) in desc.springs.iter().enumerate() {
            check(&d.ends[0])?;
            check(&d.ends[1])?;
            let reference = (pos(&d.ends[1]) - pos(&d.ends[0])).norm();
            if reference < GEOM_TOL * cell_diam {
                return Err(Error::InvalidLattice(format!("spring {s} joins a node to itself")));
            }
            let rest_length = d.rest_length.unwrap_or(reference);
            let stiffness = d.stiffness.unwrap_or(1.0);
            let weight = d.weight.unwrap_or(1.0);
            if !(rest_length > 0.0 && rest_length.is_finite()) {
                return Err(Error::InvalidLattice(format!("spring {s}: rest length must be positive")));
            }
            if !(stiffness > 0.0 && stiffness.is_finite()) {
                return Err(Error::InvalidLattice(format!("spring {s}: stiffness must be positive")));
            }
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(Error::InvalidLattice(format!("spring {s}: weight must lie in (0,1]")));
            }
            springs.push(SpringTerm { ends: d.ends, rest_length, stiffness, weight });
        }

        let mut angles = Vec::with_capacity(desc.angles.len());
        for (a, d) in desc.angles.iter().enumerate() {
            for r in [&d.apex, &d.arms[0], &d.arms[1]] {
                check(r)?;
            }
            if d.apex == d.arms[0] || d.apex == d.arms[1] {
                return Err(Error::InvalidLattice(format!("angle {a}: apex coincides with an arm")));
            }
            if !(-1.0..=1.0).contains(&d.preferred_cosine) {
                return Err(Error::InvalidLattice(format!("angle {a}: preferred cosine outside [-1,1]")));
            }
            if !(d.strength >= 0.0 && d.strength.is_finite()) {
                return Err(Error::InvalidLattice(format!("angle {a}: strength must be nonnegative")));
            }
            angles.push(AngleTerm {
                apex: d.apex,
                arms: d.arms,
                preferred_cosine: d.preferred_cosine,
                strength: d.strength,
                form: d.form,
            });
        }

        let mut seen = BTreeSet::new();
        for &t in &desc.penalty_triangles {
            if t >= triangle_geometry.len() {
                return Err(Error::InvalidLattice(format!("penalty triangle {t} does not exist")));
            }
            if !seen.insert(t) {
                return Err(Error::InvalidLattice(format!("penalty triangle {t} listed twice")));
            }
        }
        if !(desc.eta > 0.0 && desc.eta.is_finite()) {
            return Err(Error::InvalidLattice("eta must be positive".into()));
        }

        if let Some(dec) = &desc.decomposition {
            for p in dec.upper.iter().chain(&dec.lower) {
                for r in &p.vertices {
                    check(r)?;
                }
            }
            for path in &dec.paths {
                if path.spring >= springs.len() {
                    return Err(Error::InvalidLattice(format!("path for unknown spring {}", path.spring)));
                }
            }
        }
        for mech in &desc.mechanisms {
            if let Mechanism::AlternatingRotation { up_centroids } = mech {
                if up_centroids.len() != nb {
                    return Err(Error::InvalidLattice("one up-centroid per basic node is required".into()));
                }
            }
        }

        let mut spec = LatticeSpec {
            cell_vectors: [v1, v2],
            basis,
            basis_inv,
            cell_polygon,
            cell_area,
            nodes,
            springs,
            angles,
            triangles: desc.triangles.clone(),
            triangle_geometry,
            ghosts,
            penalty_triangles: desc.penalty_triangles.clone(),
            penalty_weighting: desc.penalty_weighting,
            eta: desc.eta,
            reach: Reach { n: 1, m: 1, d_m: 0.0 },
            desc,
        };
        spec.reach = spec.derive_reach();
        Ok(spec)
    }

    pub fn description(&self) -> &LatticeDescription {
        &self.desc
    }

    pub fn name(&self) -> &str {
        &self.desc.name
    }

    pub fn dimension(&self) -> usize {
        2
    }

    pub fn cell_vectors(&self) -> [Vec2; 2] {
        self.cell_vectors
    }

    /// Matrix whose columns are the cell vectors.
    pub fn basis(&self) -> &Mat2 {
        &self.basis
    }

    pub fn basis_inverse(&self) -> &Mat2 {
        &self.basis_inv
    }

    /// Unit cell polygon, counter-clockwise.
    pub fn cell_polygon(&self) -> &[Vec2] {
        &self.cell_polygon
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn basic_nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn num_basic(&self) -> usize {
        self.nodes.len()
    }

    pub fn springs(&self) -> &[SpringTerm] {
        &self.springs
    }

    pub fn angles(&self) -> &[AngleTerm] {
        &self.angles
    }

    pub fn triangles(&self) -> &[[Vertex; 3]] {
        &self.triangles
    }

    /// Unscaled positions of the triangle vertices in cell 0.
    pub fn triangle_geometry(&self) -> &[[Vec2; 3]] {
        &self.triangle_geometry
    }

    pub fn ghosts(&self) -> &[GhostRule] {
        &self.ghosts
    }

    pub fn penalty_triangles(&self) -> &[usize] {
        &self.penalty_triangles
    }

    pub fn penalty_weighting(&self) -> PenaltyWeighting {
        self.penalty_weighting
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn reach(&self) -> Reach {
        self.reach
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.desc.decomposition.as_ref()
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.desc.mechanisms
    }

    /// Same lattice with a different penalty constant.
    pub fn with_eta(&self, eta: f64) -> Result<LatticeSpec> {
        let mut d = self.desc.clone();
        d.eta = eta;
        LatticeSpec::build(d)
    }

    /// Same lattice with the orientation penalty removed.
    pub fn without_penalty(&self) -> LatticeSpec {
        let mut d = self.desc.clone();
        d.penalty_triangles.clear();
        LatticeSpec::build(d).expect("removing the penalty keeps a valid lattice")
    }

    pub fn with_penalty_weighting(&self, w: PenaltyWeighting) -> LatticeSpec {
        let mut d = self.desc.clone();
        d.penalty_weighting = w;
        LatticeSpec::build(d).expect("changing the weighting keeps a valid lattice")
    }

    #[inline]
    pub fn lattice_vector(&self, c: Cell) -> Vec2 {
        self.cell_vectors[0] * c[0] as f64 + self.cell_vectors[1] * c[1] as f64
    }

    /// Unscaled node position. Panics on an out-of-range basic index.
    #[inline]
    pub fn position(&self, r: &NodeRef) -> Vec2 {
        self.nodes[r.basic] + self.lattice_vector(r.offset)
    }

    /// Unscaled position of a triangulation vertex of the cell `cell`.
    pub fn vertex_position(&self, v: &Vertex, cell: Cell) -> Vec2 {
        self.vertex_sources(v)
            .iter()
            .fold(Vec2::zeros(), |acc, (t, r)| acc + self.position(&r.shifted(cell)) * *t)
    }

    /// Convex combination defining a vertex, in cell-0 coordinates.
    pub fn vertex_sources(&self, v: &Vertex) -> Vec<(f64, NodeRef)> {
        match v {
            Vertex::Node(r) => vec![(1.0, *r)],
            Vertex::Ghost { ghost } => self.ghosts[*ghost].sources.clone(),
        }
    }

    /// Nodes whose values enter `E(u, U + cell)`.
    pub fn energy_support(&self, cell: Cell) -> BTreeSet<NodeRef> {
        let mut s = BTreeSet::new();
        for sp in &self.springs {
            s.insert(sp.ends[0].shifted(cell));
            s.insert(sp.ends[1].shifted(cell));
        }
        for a in &self.angles {
            s.insert(a.apex.shifted(cell));
            s.insert(a.arms[0].shifted(cell));
            s.insert(a.arms[1].shifted(cell));
        }
        for &t in &self.penalty_triangles {
            for v in &self.triangles[t] {
                for (_, r) in self.vertex_sources(v) {
                    s.insert(r.shifted(cell));
                }
            }
        }
        s
    }

    /// Nodes needed to linearize every triangle of `U + cell`.
    pub fn mesh_support(&self, cell: Cell) -> BTreeSet<NodeRef> {
        let mut s = BTreeSet::new();
        for tri in &self.triangles {
            for v in tri {
                for (_, r) in self.vertex_sources(v) {
                    s.insert(r.shifted(cell));
                }
            }
        }
        s
    }

    /// Nodes needed to evaluate energies and linearize `U_m`-neighborhoods of
    /// every cell in `cells`.
    pub fn window_support(&self, cells: &[Cell]) -> BTreeSet<NodeRef> {
        let r = self.reach.m as i64 - 1;
        let mut expanded = BTreeSet::new();
        for c in cells {
            for a in cell_range(r) {
                expanded.insert(cell_add(*c, a));
            }
        }
        let mut s = BTreeSet::new();
        for c in &expanded {
            s.extend(self.mesh_support(*c));
        }
        for c in cells {
            s.extend(self.energy_support(*c));
        }
        s
    }

    /// Smallest distance between two distinct lattice nodes.
    pub fn nearest_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, p) in self.nodes.iter().enumerate() {
            for (j, q) in self.nodes.iter().enumerate() {
                for o in cell_range(1) {
                    if i == j && o == [0, 0] {
                        continue;
                    }
                    d = d.min((q + self.lattice_vector(o) - p).norm());
                }
            }
        }
        d
    }

    /// Vertices of all cells `U + alpha`, `alpha` in `[-(r-1), r-1]^2`.
    pub fn expanded_vertices(&self, r: usize) -> Vec<Vec2> {
        let mut out = Vec::new();
        for a in cell_range(r as i64 - 1) {
            let t = self.lattice_vector(a);
            for p in &self.cell_polygon {
                let q = p + t;
                if !out.iter().any(|x: &Vec2| (x - q).norm() < 1e-12) {
                    out.push(q);
                }
            }
        }
        out
    }

    fn in_expanded_closure(&self, p: Vec2, r: usize) -> bool {
        let tol = GEOM_TOL * geometry::diameter(&self.cell_polygon);
        cell_range(r as i64 - 1)
            .any(|a| convex_inner_distance(p - self.lattice_vector(a), &self.cell_polygon) >= -tol)
    }

    fn derive_reach(&self) -> Reach {
        const LIMIT: usize = 64;
        let energy_points: Vec<Vec2> = self.energy_support([0, 0]).iter().map(|r| self.position(r)).collect();
        let mut n = 1;
        while n < LIMIT && !energy_points.iter().all(|p| self.in_expanded_closure(*p, n)) {
            n += 1;
        }
        let mut mesh_points = Vec::new();
        for a in cell_range(n as i64 - 1) {
            for r in self.mesh_support(a) {
                mesh_points.push(self.position(&r));
            }
        }
        let mut m = n;
        while m < LIMIT && !mesh_points.iter().all(|p| self.in_expanded_closure(*p, m)) {
            m += 1;
        }
        let d_m = geometry::diameter(&self.expanded_vertices(m));
        Reach { n, m, d_m }
    }
}

fn validate_cell_polygon(poly: &[Vec2], area: f64, basis: &Mat2) -> Result<()> {
    if !geometry::is_strictly_convex(poly) {
        return Err(Error::InvalidLattice("unit cell polygon must be strictly convex".into()));
    }
    let a = geometry::signed_area(poly).abs();
    if (a - area).abs() > GEOM_TOL * area {
        return Err(Error::InvalidLattice(format!(
            "unit cell polygon has area {a}, the cell vectors span {area}"
        )));
    }
    let diam = geometry::diameter(poly);
    for o in cell_range(2) {
        if o == [0, 0] {
            continue;
        }
        let t = basis * Vec2::new(o[0] as f64, o[1] as f64);
        let shifted: Vec<Vec2> = poly.iter().map(|p| p + t).collect();
        if geometry::convex_polygons_overlap(poly, &shifted, GEOM_TOL * diam) {
            return Err(Error::InvalidLattice("unit cell polygon does not tile the plane".into()));
        }
    }
    Ok(())
}

/// Builds a lattice from its description.
pub fn build_lattice(desc: LatticeDescription) -> Result<LatticeSpec> {
    LatticeSpec::build(desc)
}

/// Position `eps * (p_basic + sum alpha_i v_i)`.
pub fn node_position(spec: &LatticeSpec, r: &NodeRef, epsilon: f64) -> Result<Vec2> {
    if r.basic >= spec.num_basic() {
        return Err(Error::NodeOutOfRange { index: r.basic, len: spec.num_basic() });
    }
    Ok(spec.position(r) * epsilon)
}

pub fn compute_reach(spec: &LatticeSpec) -> Reach {
    spec.derive_reach()
}

/// Offsets `alpha` whose cells satisfy `eps * closure(U_m) + eps * alpha` strictly
/// inside the domain.
pub fn cells_in_domain(spec: &LatticeSpec, domain: &Domain, epsilon: f64) -> Result<CellSet> {
    domain.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let verts = domain.vertices();
    let tol = 1e-12 * domain.diameter();
    let hull = spec.expanded_vertices(spec.reach().m);
    let (lo, hi) = domain.bounding_box();
    let mut fmin = Vec2::repeat(f64::INFINITY);
    let mut fmax = Vec2::repeat(f64::NEG_INFINITY);
    for corner in [lo, hi, Vec2::new(lo.x, hi.y), Vec2::new(hi.x, lo.y)] {
        let f = spec.basis_inverse() * (corner / epsilon);
        fmin = fmin.inf(&f);
        fmax = fmax.sup(&f);
    }
    let pad = spec.reach().m as i64 + 2;
    let (i0, i1) = (fmin.x.floor() as i64 - pad, fmax.x.ceil() as i64 + pad);
    let (j0, j1) = (fmin.y.floor() as i64 - pad, fmax.y.ceil() as i64 + pad);
    let mut out = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let t = spec.lattice_vector([i, j]);
            if hull.iter().all(|w| convex_inner_distance((w + t) * epsilon, &verts) > tol) {
                out.push([i, j]);
            }
        }
    }
    Ok(CellSet::new(out, epsilon))
}
