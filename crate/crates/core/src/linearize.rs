//! Nodal deformations and their piecewise-affine extension over the triangulation.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fit::log_log_slope;
use crate::geometry::{columns, spectral_norm, Domain, Mat2, Vec2};
use crate::lattice::{cells_in_domain, Cell, CellSet, LatticeSpec, NodeRef};

/// Anything that assigns a value to lattice nodes at a scale `epsilon`.
pub trait NodalField: Sync {
    fn epsilon(&self) -> f64;
    fn value(&self, spec: &LatticeSpec, node: &NodeRef) -> Result<Vec2>;
}

/// How a [`Deformation`] answers for nodes it does not store.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtensionRule {
    Zero,
    Affine { lambda: Mat2, offset: Vec2 },
}

/// Nodal values on a window of the `epsilon`-scaled lattice.
#[derive(Clone, Debug)]
pub struct Deformation {
    pub values: BTreeMap<NodeRef, Vec2>,
    pub window: CellSet,
    pub extension: Option<ExtensionRule>,
}

impl Deformation {
    pub fn new(window: CellSet) -> Self {
        Deformation { values: BTreeMap::new(), window, extension: None }
    }

    pub fn with_extension(mut self, rule: ExtensionRule) -> Self {
        self.extension = Some(rule);
        self
    }

    /// True when the value of `node` comes from storage rather than the extension rule.
    pub fn is_stored(&self, node: &NodeRef) -> bool {
        self.values.contains_key(node)
    }

    /// Writes `node, x, y, u1, u2` rows for the stored values.
    pub fn write_csv<W: Write>(&self, spec: &LatticeSpec, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["basic", "i", "j", "x", "y", "u1", "u2"])?;
        let eps = self.window.epsilon;
        for (r, u) in &self.values {
            let p = spec.position(r) * eps;
            out.write_record(&[
                r.basic.to_string(),
                r.offset[0].to_string(),
                r.offset[1].to_string(),
                p.x.to_string(),
                p.y.to_string(),
                u.x.to_string(),
                u.y.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl NodalField for Deformation {
    fn epsilon(&self) -> f64 {
        self.window.epsilon
    }

    fn value(&self, spec: &LatticeSpec, node: &NodeRef) -> Result<Vec2> {
        if let Some(v) = self.values.get(node) {
            return Ok(*v);
        }
        match &self.extension {
            None => Err(Error::MissingValue(*node)),
            Some(ExtensionRule::Zero) => Ok(Vec2::zeros()),
            Some(ExtensionRule::Affine { lambda, offset }) => {
                Ok(lambda * (spec.position(node) * self.window.epsilon) + offset)
            }
        }
    }
}

/// A nodal field given by a function of the node reference.
pub struct FnField<F> {
    pub epsilon: f64,
    pub f: F,
}

impl<F: Fn(&NodeRef) -> Vec2 + Sync> NodalField for FnField<F> {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn value(&self, _spec: &LatticeSpec, node: &NodeRef) -> Result<Vec2> {
        Ok((self.f)(node))
    }
}

/// Triangle `triangle` of the cell with offset `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleId {
    pub cell: Cell,
    pub triangle: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrianglePiece {
    pub id: TriangleId,
    pub vertices: [Vec2; 3],
    pub gradient: Mat2,
    pub offset: Vec2,
}

impl TrianglePiece {
    pub fn area(&self) -> f64 {
        crate::geometry::triangle_area(self.vertices[0], self.vertices[1], self.vertices[2])
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        self.gradient * x + self.offset
    }
}

/// Piecewise-affine field on the scaled triangulation of a set of cells.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearField {
    pub epsilon: f64,
    pieces: Vec<TrianglePiece>,
    index: HashMap<TriangleId, usize>,
}

impl PiecewiseLinearField {
    pub fn pieces(&self) -> &[TrianglePiece] {
        &self.pieces
    }

    pub fn piece(&self, id: &TriangleId) -> Option<&TrianglePiece> {
        self.index.get(id).map(|&i| &self.pieces[i])
    }

    /// Writes one row per triangle: id, vertices, gradient, offset.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "i", "j", "triangle", "x1", "y1", "x2", "y2", "x3", "y3", "g11", "g12", "g21", "g22", "c1", "c2",
        ])?;
        for p in &self.pieces {
            let v = &p.vertices;
            let g = &p.gradient;
            let row = [
                p.id.cell[0].to_string(),
                p.id.cell[1].to_string(),
                p.id.triangle.to_string(),
                v[0].x.to_string(),
                v[0].y.to_string(),
                v[1].x.to_string(),
                v[1].y.to_string(),
                v[2].x.to_string(),
                v[2].y.to_string(),
                g[(0, 0)].to_string(),
                g[(0, 1)].to_string(),
                g[(1, 0)].to_string(),
                g[(1, 1)].to_string(),
                p.offset.x.to_string(),
                p.offset.y.to_string(),
            ];
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Affine map `x -> G x + c` interpolating `u` at the vertices `x`.
pub fn affine_on_triangle(x: &[Vec2; 3], u: &[Vec2; 3]) -> Result<(Mat2, Vec2)> {
    let p = columns(x[0] - x[1], x[0] - x[2]);
    let scale = (x[0] - x[1]).norm_squared().max((x[0] - x[2]).norm_squared());
    if p.determinant().abs() <= 1e-14 * scale {
        return Err(Error::DegenerateTriangle(format!("{:?}", x)));
    }
    let pinv = p.try_inverse().ok_or_else(|| Error::DegenerateTriangle(format!("{:?}", x)))?;
    let g = columns(u[0] - u[1], u[0] - u[2]) * pinv;
    Ok((g, u[0] - g * x[0]))
}

/// Gradient `[u1-u2, u1-u3] [x1-x2, x1-x3]^{-1}` of the affine interpolant.
pub fn triangle_gradient(x: &[Vec2; 3], u: &[Vec2; 3]) -> Result<Mat2> {
    affine_on_triangle(x, u).map(|(g, _)| g)
}

/// Linearizes a deformation on its window.
pub fn linearize(def: &Deformation, spec: &LatticeSpec) -> Result<PiecewiseLinearField> {
    linearize_cells(def, spec, &def.window.offsets)
}

/// Linearizes any nodal field on the given cells.
pub fn linearize_cells(field: &impl NodalField, spec: &LatticeSpec, cells: &[Cell]) -> Result<PiecewiseLinearField> {
    let eps = field.epsilon();
    let min_area = 1e-14 * spec.cell_area() * eps * eps;
    let ntri = spec.triangles().len();
    let per_cell: Vec<Result<Vec<TrianglePiece>>> = cells
        .par_iter()
        .map(|cell| {
            let mut out = Vec::with_capacity(ntri);
            for (t, tri) in spec.triangles().iter().enumerate() {
                let mut x = [Vec2::zeros(); 3];
                let mut u = [Vec2::zeros(); 3];
                for k in 0..3 {
                    x[k] = spec.vertex_position(&tri[k], *cell) * eps;
                    for (theta, r) in spec.vertex_sources(&tri[k]) {
                        u[k] += field.value(spec, &r.shifted(*cell))? * theta;
                    }
                }
                if crate::geometry::triangle_area(x[0], x[1], x[2]) < min_area {
                    return Err(Error::DegenerateTriangle(format!("triangle {t} of cell {:?}", cell)));
                }
                let (gradient, offset) = affine_on_triangle(&x, &u)?;
                out.push(TrianglePiece { id: TriangleId { cell: *cell, triangle: t }, vertices: x, gradient, offset });
            }
            Ok(out)
        })
        .collect();
    let mut pieces = Vec::with_capacity(cells.len() * ntri);
    for r in per_cell {
        pieces.extend(r?);
    }
    let index = pieces.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
    Ok(PiecewiseLinearField { epsilon: eps, pieces, index })
}

pub fn gradient_on_triangle(field: &PiecewiseLinearField, id: &TriangleId) -> Result<Mat2> {
    field
        .piece(id)
        .map(|p| p.gradient)
        .ok_or_else(|| invalid(format!("triangle {:?} is not covered by the field", id)))
}

/// Region over which a gradient norm is integrated.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    All,
    Cells(&'a [Cell]),
    Triangles(&'a [TriangleId]),
}

/// `sum_T |grad u|_T|^2 |T|` (Frobenius norm) over the region.
pub fn l2_gradient_norm(field: &PiecewiseLinearField, region: Region<'_>) -> Result<f64> {
    let term = |p: &TrianglePiece| p.gradient.norm_squared() * p.area();
    match region {
        Region::All => Ok(field.pieces.iter().map(term).sum()),
        Region::Cells(cells) => {
            let mut sorted = cells.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            let mut s = 0.0;
            for cell in sorted {
                let mut t = 0;
                while let Some(p) = field.piece(&TriangleId { cell, triangle: t }) {
                    s += term(p);
                    t += 1;
                }
                if t == 0 {
                    return Err(invalid(format!("cell {:?} is not covered by the field", cell)));
                }
            }
            Ok(s)
        }
        Region::Triangles(ids) => {
            let mut s = 0.0;
            for id in ids {
                let p = field.piece(id).ok_or_else(|| invalid(format!("triangle {:?} is not covered", id)))?;
                s += term(p);
            }
            Ok(s)
        }
    }
}

/// Samples `f` at every node needed by the window.
pub fn sample_at_nodes(f: impl Fn(Vec2) -> Vec2, window: &CellSet, spec: &LatticeSpec) -> Deformation {
    let eps = window.epsilon;
    let mut def = Deformation::new(window.clone());
    for r in spec.window_support(&window.offsets) {
        def.values.insert(r, f(spec.position(&r) * eps));
    }
    def
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationRow {
    pub epsilon: f64,
    pub cells: usize,
    /// `max_T |grad u_eps|_T| / Lip(f)` (operator norm).
    pub gradient_ratio: f64,
    /// `sup |u_eps - f| / (eps Lip(f))`.
    pub error_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationReport {
    pub rows: Vec<InterpolationRow>,
    /// Log-log slope of the gradient ratio against epsilon (`None` if a ratio is 0).
    pub gradient_slope: Option<f64>,
    pub error_slope: Option<f64>,
}

impl InterpolationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epsilon", "cells", "gradient_ratio", "error_ratio", "log_epsilon"])?;
        for r in &self.rows {
            out.write_record(&[
                r.epsilon.to_string(),
                r.cells.to_string(),
                r.gradient_ratio.to_string(),
                r.error_ratio.to_string(),
                r.epsilon.ln().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

const SAMPLE_RES: usize = 6;

/// Measures interpolation constants of `f` (Lipschitz constant `lip`) on the
/// cells counted in `domain`, for each epsilon.
pub fn interpolation_estimate_report(
    f: impl Fn(Vec2) -> Vec2 + Sync,
    lip: f64,
    spec: &LatticeSpec,
    domain: &Domain,
    epsilons: &[f64],
) -> Result<InterpolationReport> {
    if !(lip >= 0.0 && lip.is_finite()) {
        return Err(invalid("Lipschitz constant must be a nonnegative number"));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let window = cells_in_domain(spec, domain, eps)?;
        let def = sample_at_nodes(&f, &window, spec);
        let field = linearize(&def, spec)?;
        let (gmax, emax) = field
            .pieces()
            .par_iter()
            .map(|p| {
                let mut e: f64 = 0.0;
                for i in 0..=SAMPLE_RES {
                    for j in 0..=SAMPLE_RES - i {
                        let k = SAMPLE_RES - i - j;
                        let x = (p.vertices[0] * i as f64 + p.vertices[1] * j as f64 + p.vertices[2] * k as f64)
                            / SAMPLE_RES as f64;
                        e = e.max((p.eval(x) - f(x)).norm());
                    }
                }
                (spectral_norm(&p.gradient), e)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        let (gradient_ratio, error_ratio) = if lip > 0.0 { (gmax / lip, emax / (eps * lip)) } else { (gmax, emax) };
        rows.push(InterpolationRow { epsilon: eps, cells: window.len(), gradient_ratio, error_ratio });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.gradient_ratio).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error_ratio).collect();
    Ok(InterpolationReport { gradient_slope: log_log_slope(&eps, &g), error_slope: log_log_slope(&eps, &e), rows })
}

#[cfg(test)]
mod tests;
