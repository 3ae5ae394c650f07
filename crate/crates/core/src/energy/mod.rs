//! Spring, orientation-penalty and angle energies of cells and domains.
//!
//! Cell energies at scale `eps` follow elasticity scaling: with reduced values
//! `u / eps` on the unit lattice, `E_eps(u, eps U + alpha) = eps^2 E(u / eps, U + alpha)`.

mod compiled;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{columns, cross, Domain, Mat2, Vec2};
use crate::lattice::{cells_in_domain, AngleForm, AngleTerm, Cell, CellSet, LatticeSpec, NodeRef, PenaltyWeighting, SpringTerm};
use crate::linearize::{NodalField, PiecewiseLinearField, TriangleId};

pub use compiled::{CompiledEnergy, Parts, Slot};

/// Orientation penalty `f(t) = 1/eta` for `t <= 0`, else 0; with `tau > 0` the
/// logistic smoothing `sigma(-t/tau) / eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyFunction {
    pub eta: f64,
    pub tau: f64,
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PenaltyFunction {
    pub fn exact(eta: f64) -> Self {
        PenaltyFunction { eta, tau: 0.0 }
    }

    pub fn smoothed(eta: f64, tau: f64) -> Self {
        PenaltyFunction { eta, tau }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if self.tau == 0.0 {
            if t <= 0.0 {
                1.0 / self.eta
            } else {
                0.0
            }
        } else {
            logistic(-t / self.tau) / self.eta
        }
    }

    /// Derivative of the smoothed penalty (0 for the exact form).
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        if self.tau == 0.0 {
            return 0.0;
        }
        let s = logistic(-t / self.tau);
        -s * (1.0 - s) / (self.eta * self.tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TermId {
    Spring(usize),
    Penalty(usize),
    Angle(usize),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub spring: f64,
    pub penalty: f64,
    pub angle: f64,
    pub total: f64,
    pub per_term: Vec<(TermId, f64)>,
}

impl EnergyBreakdown {
    fn push(&mut self, id: TermId, v: f64) {
        match id {
            TermId::Spring(_) => self.spring += v,
            TermId::Penalty(_) => self.penalty += v,
            TermId::Angle(_) => self.angle += v,
        }
        self.per_term.push((id, v));
    }

    fn finish(mut self) -> Self {
        self.total = self.spring + self.penalty + self.angle;
        self
    }

    /// Adds the part sums of `other` (per-term values are not merged).
    pub fn accumulate(&mut self, other: &EnergyBreakdown) {
        self.spring += other.spring;
        self.penalty += other.penalty;
        self.angle += other.angle;
        self.total = self.spring + self.penalty + self.angle;
    }
}

/// `w k (|b - a| - r)^2` on reduced values.
#[inline]
pub(crate) fn spring_value(ua: Vec2, ub: Vec2, rest: f64, coef: f64) -> f64 {
    let l = (ub - ua).norm() - rest;
    coef * l * l
}

/// Angle term on the arms `l1`, `l2` leaving the apex.
pub(crate) fn angle_value(l1: Vec2, l2: Vec2, cosine: f64, strength: f64, form: AngleForm) -> Result<f64> {
    match form {
        AngleForm::AbsoluteCosine => Ok(strength * (l1.dot(&l2) - l1.norm() * l2.norm() * cosine).abs()),
        AngleForm::Torsional => {
            if l1.norm() == 0.0 || l2.norm() == 0.0 {
                return Err(Error::ZeroArm);
            }
            let theta = cross(l1, l2).atan2(l1.dot(&l2)).abs();
            let d = theta - cosine.clamp(-1.0, 1.0).acos();
            Ok(strength * d * d)
        }
    }
}

fn reduced(field: &impl NodalField, spec: &LatticeSpec, r: &NodeRef) -> Result<Vec2> {
    Ok(field.value(spec, r)? / field.epsilon())
}

/// Energy of one spring term of the cell `cell`.
pub fn spring_energy(def: &impl NodalField, spec: &LatticeSpec, term: &SpringTerm, cell: Cell) -> Result<f64> {
    let eps = def.epsilon();
    let a = reduced(def, spec, &term.ends[0].shifted(cell))?;
    let b = reduced(def, spec, &term.ends[1].shifted(cell))?;
    Ok(eps * eps * spring_value(a, b, term.rest_length, term.weight * term.stiffness))
}

/// Energy of one angle term of the cell `cell`.
pub fn angle_energy(def: &impl NodalField, spec: &LatticeSpec, term: &AngleTerm, cell: Cell) -> Result<f64> {
    let eps = def.epsilon();
    let o = reduced(def, spec, &term.apex.shifted(cell))?;
    let a = reduced(def, spec, &term.arms[0].shifted(cell))?;
    let b = reduced(def, spec, &term.arms[1].shifted(cell))?;
    Ok(eps * eps * angle_value(a - o, b - o, term.preferred_cosine, term.strength, term.form)?)
}

pub(crate) fn penalty_weight(spec: &LatticeSpec, t: usize) -> f64 {
    match spec.penalty_weighting() {
        PenaltyWeighting::Unweighted => 1.0,
        PenaltyWeighting::AreaWeighted => {
            let g = spec.triangle_geometry()[t];
            crate::geometry::triangle_area(g[0], g[1], g[2])
        }
    }
}

/// Penalty of the cell `cell` read off a linearized field.
pub fn penalty_energy(field: &PiecewiseLinearField, spec: &LatticeSpec, pf: &PenaltyFunction, cell: Cell) -> Result<f64> {
    let eps = field.epsilon;
    let mut s = 0.0;
    for &t in spec.penalty_triangles() {
        let p = field
            .piece(&TriangleId { cell, triangle: t })
            .ok_or_else(|| crate::error::invalid(format!("field does not cover triangle {t} of cell {:?}", cell)))?;
        s += penalty_weight(spec, t) * pf.value(p.gradient.determinant());
    }
    Ok(eps * eps * s)
}

/// Reduced gradient on penalty triangle `t` of cell `cell`.
fn triangle_gradient_reduced(field: &impl NodalField, spec: &LatticeSpec, t: usize, cell: Cell) -> Result<Mat2> {
    let x = spec.triangle_geometry()[t];
    let mut u = [Vec2::zeros(); 3];
    for (k, v) in spec.triangles()[t].iter().enumerate() {
        for (theta, r) in spec.vertex_sources(v) {
            u[k] += reduced(field, spec, &r.shifted(cell))? * theta;
        }
    }
    let p = columns(x[0] - x[1], x[0] - x[2]);
    let pinv = p.try_inverse().ok_or_else(|| Error::DegenerateTriangle(format!("triangle {t}")))?;
    Ok(columns(u[0] - u[1], u[0] - u[2]) * pinv)
}

/// Energy of the cell `cell` with the per-term breakdown.
pub fn cell_energy(def: &impl NodalField, spec: &LatticeSpec, pf: &PenaltyFunction, cell: Cell) -> Result<EnergyBreakdown> {
    let eps = def.epsilon();
    let e2 = eps * eps;
    let mut out = EnergyBreakdown::default();
    for (i, s) in spec.springs().iter().enumerate() {
        out.push(TermId::Spring(i), spring_energy(def, spec, s, cell)?);
    }
    for &t in spec.penalty_triangles() {
        let g = triangle_gradient_reduced(def, spec, t, cell)?;
        out.push(TermId::Penalty(t), e2 * penalty_weight(spec, t) * pf.value(g.determinant()));
    }
    for (i, a) in spec.angles().iter().enumerate() {
        out.push(TermId::Angle(i), angle_energy(def, spec, a, cell)?);
    }
    Ok(out.finish())
}

/// Energy summed over a list of cells, in the given order.
pub fn cells_energy(def: &impl NodalField, spec: &LatticeSpec, pf: &PenaltyFunction, cells: &[Cell]) -> Result<DomainEnergy> {
    let rows: Vec<Result<(Cell, EnergyBreakdown)>> = cells
        .par_iter()
        .map(|c| {
            let mut e = cell_energy(def, spec, pf, *c)?;
            e.per_term.clear();
            Ok((*c, e))
        })
        .collect();
    let mut total = EnergyBreakdown::default();
    let mut per_cell = Vec::with_capacity(rows.len());
    for r in rows {
        let (c, e) = r?;
        total.accumulate(&e);
        per_cell.push((c, e));
    }
    Ok(DomainEnergy { total, per_cell })
}

/// Total energy and per-cell rows of a domain evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainEnergy {
    pub total: EnergyBreakdown,
    pub per_cell: Vec<(Cell, EnergyBreakdown)>,
}

impl DomainEnergy {
    /// Writes `i, j, spring, penalty, angle, total` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j", "spring", "penalty", "angle", "total"])?;
        for (c, e) in &self.per_cell {
            out.write_record(&[
                c[0].to_string(),
                c[1].to_string(),
                e.spring.to_string(),
                e.penalty.to_string(),
                e.angle.to_string(),
                e.total.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sum of the scaled cell energies over the cells counted in `domain`.
pub fn domain_energy(def: &impl NodalField, spec: &LatticeSpec, pf: &PenaltyFunction, domain: &Domain) -> Result<DomainEnergy> {
    let cells = cells_in_domain(spec, domain, def.epsilon())?;
    cells_energy(def, spec, pf, &cells.offsets)
}

/// Gradient of the smoothed energy of the window cells with respect to every
/// node value the energy depends on.
pub fn energy_gradient(
    def: &impl NodalField,
    spec: &LatticeSpec,
    pf: &PenaltyFunction,
    window: &CellSet,
) -> Result<BTreeMap<NodeRef, Vec2>> {
    if pf.tau <= 0.0 {
        return Err(Error::UnsmoothedPenalty);
    }
    let eps = def.epsilon();
    let mut nodes: Vec<NodeRef> = Vec::new();
    for c in &window.offsets {
        nodes.extend(spec.energy_support(*c));
    }
    nodes.sort_unstable();
    nodes.dedup();
    let index: std::collections::HashMap<NodeRef, usize> = nodes.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let energy = CompiledEnergy::build(spec, &window.offsets, nodes.len(), 1.0 / eps, eps * eps, |r| {
        Ok(Slot { base: Vec2::zeros(), var: index.get(r).copied() })
    })?;
    let mut x = vec![0.0; 2 * nodes.len()];
    for (i, r) in nodes.iter().enumerate() {
        let v = def.value(spec, r)?;
        x[2 * i] = v.x;
        x[2 * i + 1] = v.y;
    }
    let mut g = vec![0.0; x.len()];
    energy.value_and_gradient(&x, pf, &mut g)?;
    Ok(nodes.iter().enumerate().map(|(i, r)| (*r, Vec2::new(g[2 * i], g[2 * i + 1]))).collect())
}
