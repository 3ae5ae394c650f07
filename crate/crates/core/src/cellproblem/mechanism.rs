//! Explicit zero-energy states: alternating rotations and accordion folds.

use std::f64::consts::FRAC_PI_3;

use super::{BoundaryMode, CorrectedField, Corrector, Start};
use crate::energy::{penalty_weight, PenaltyFunction};
use crate::error::{invalid, Result};
use crate::geometry::{rotation, Mat2, Vec2};
use crate::lattice::{Cell, LatticeSpec, Mechanism, NodeRef};
use crate::linearize::{triangle_gradient, NodalField};

/// A periodic state `lambda x + psi` whose period is `period[0] x period[1]` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismState {
    pub lambda: Mat2,
    pub corrector: Corrector,
    pub period: [usize; 2],
}

impl MechanismState {
    pub fn period_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for i in 0..self.period[0] as i64 {
            for j in 0..self.period[1] as i64 {
                out.push([i, j]);
            }
        }
        out
    }

    pub fn field(&self) -> CorrectedField<'_> {
        CorrectedField::new(self.lambda, &self.corrector)
    }
}

/// Rigid rotation of the bodies of an alternating-rotation lattice by
/// `phi + theta` and `phi - theta`, with macroscopic gradient `cos(theta) R(phi)`.
pub fn alternating_rotation_state(spec: &LatticeSpec, phi: f64, theta: f64) -> Result<MechanismState> {
    let centroids = spec
        .mechanisms()
        .iter()
        .find_map(|m| match m {
            Mechanism::AlternatingRotation { up_centroids } => Some(up_centroids),
            _ => None,
        })
        .ok_or_else(|| invalid(format!("lattice `{}` has no alternating-rotation mechanism", spec.name())))?;
    let f = rotation(phi) * theta.cos();
    let r = rotation(phi + theta);
    let mut c = Corrector::zeros(spec.num_basic(), BoundaryMode::Periodic, 1);
    for (b, p) in spec.basic_nodes().iter().enumerate() {
        let cu = Vec2::new(centroids[b][0], centroids[b][1]);
        let y = f * cu + r * (p - cu);
        c.set(b, [0, 0], y - f * p);
    }
    Ok(MechanismState { lambda: f, corrector: c, period: [1, 1] })
}

/// The twisted Kagome mechanism: gradient `cos(theta) R(theta)`.
pub fn twisted_kagome_state(theta: f64) -> Result<MechanismState> {
    if !(theta.abs() < FRAC_PI_3) {
        return Err(invalid(format!("twist angle must lie in (-pi/3, pi/3), got {theta}")));
    }
    alternating_rotation_state(&LatticeSpec::from_catalog("kagome")?, theta, theta)
}

fn is_unit_square_grid(spec: &LatticeSpec) -> bool {
    spec.num_basic() == 1 && (spec.basis() - Mat2::identity()).abs().max() < 1e-12
}

/// Accordion fold of the unit square grid with period `k` along `axis`: the first
/// `forward` columns keep their orientation, the rest are reflected.
pub fn fold_state(spec: &LatticeSpec, k: usize, forward: usize, axis: usize) -> Result<MechanismState> {
    if !is_unit_square_grid(spec) {
        return Err(invalid(format!("lattice `{}` is not a unit square grid", spec.name())));
    }
    if k == 0 || forward > k || axis > 1 {
        return Err(invalid(format!("invalid fold: k = {k}, forward = {forward}, axis = {axis}")));
    }
    let c = (2.0 * forward as f64 - k as f64) / k as f64;
    let mut lambda = Mat2::identity();
    lambda[(axis, axis)] = c;
    let mut corr = Corrector::zeros(1, BoundaryMode::Periodic, k);
    for i in 0..k {
        let x = if i <= forward { i as f64 } else { (2 * forward) as f64 - i as f64 };
        let mut v = Vec2::zeros();
        v[axis] = x - c * i as f64;
        for j in 0..k {
            let cell = if axis == 0 { [i, j] } else { [j, i] };
            corr.set(0, cell, v);
        }
    }
    let period = if axis == 0 { [k, 1] } else { [1, k] };
    Ok(MechanismState { lambda, corrector: corr, period })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Accordion fold of the square lattice with gradient `diag(p/q, 1)`, on the
/// smallest period admitting it.
pub fn accordion_fold_state(p: u64, q: u64) -> Result<MechanismState> {
    accordion_fold_on(&LatticeSpec::from_catalog("square")?, p, q)
}

/// [`accordion_fold_state`] on any unit square grid.
pub fn accordion_fold_on(spec: &LatticeSpec, p: u64, q: u64) -> Result<MechanismState> {
    if q == 0 || p > q {
        return Err(invalid(format!("fold ratio {p}/{q} must lie in [0, 1]")));
    }
    let g = gcd(p, q);
    let (p, q) = (p / g, q / g);
    let k = if (p + q) % 2 == 0 { q } else { 2 * q };
    let forward = (k / q) * (q + p) / 2;
    fold_state(spec, k as usize, forward as usize, 0)
}

/// Periodic starting correctors on a `k` supercell built from the lattice's
/// registered mechanisms, matched to `lambda`.
pub fn mechanism_starts(spec: &LatticeSpec, lambda: &Mat2, k: usize) -> Result<Vec<Start>> {
    let mut out = Vec::new();
    for m in spec.mechanisms() {
        match m {
            Mechanism::AlternatingRotation { .. } => {
                let a = (lambda[(0, 0)] + lambda[(1, 1)]) / 2.0;
                let b = (lambda[(1, 0)] - lambda[(0, 1)]) / 2.0;
                let c = a.hypot(b);
                if c > 1.0 || c == 0.0 {
                    continue;
                }
                let theta = c.acos();
                if theta < 1e-15 {
                    continue;
                }
                let phi = b.atan2(a);
                for (sign, t) in [("+", theta), ("-", -theta)] {
                    let s = alternating_rotation_state(spec, phi, t)?;
                    out.push(Start {
                        label: format!("mechanism:rotation{sign}"),
                        corrector: s.corrector.resample(BoundaryMode::Periodic, k),
                    });
                }
            }
            Mechanism::AccordionFold => {
                for axis in 0..2 {
                    let c = lambda[(axis, axis)];
                    let f = ((k as f64) * (1.0 + c) / 2.0).round().clamp(0.0, k as f64) as usize;
                    if f == k {
                        continue;
                    }
                    let s = fold_state(spec, k, f, axis)?;
                    out.push(Start { label: format!("mechanism:fold{axis}"), corrector: s.corrector });
                }
            }
        }
    }
    Ok(out)
}

/// Spring-length and orientation audit of a field on a set of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismReport {
    /// All springs at rest length within tolerance and all penalty determinants positive.
    pub holds: bool,
    pub max_spring_residual: f64,
    pub min_det: f64,
    pub reversed_triangles: usize,
    /// Unscaled spring energy summed over the cells.
    pub spring_energy: f64,
    /// Unscaled exact penalty summed over the cells.
    pub penalty_energy: f64,
}

impl MechanismReport {
    pub fn summary(&self) -> String {
        format!(
            "spring residual {}, penalty {} triangles reversed",
            self.max_spring_residual, self.reversed_triangles
        )
    }
}

pub fn verify_mechanism(
    spec: &LatticeSpec,
    field: &impl NodalField,
    cells: &[Cell],
    tolerance: f64,
) -> Result<MechanismReport> {
    let eps = field.epsilon();
    let val = |r: NodeRef| -> Result<Vec2> { Ok(field.value(spec, &r)? / eps) };
    let pf = PenaltyFunction::exact(spec.eta());
    let mut rep = MechanismReport {
        holds: true,
        max_spring_residual: 0.0,
        min_det: f64::INFINITY,
        reversed_triangles: 0,
        spring_energy: 0.0,
        penalty_energy: 0.0,
    };
    for &cell in cells {
        for s in spec.springs() {
            let l = (val(s.ends[1].shifted(cell))? - val(s.ends[0].shifted(cell))?).norm();
            let d = l - s.rest_length;
            rep.max_spring_residual = rep.max_spring_residual.max(d.abs());
            rep.spring_energy += s.weight * s.stiffness * d * d;
        }
        for &t in spec.penalty_triangles() {
            let mut u = [Vec2::zeros(); 3];
            for (k, v) in spec.triangles()[t].iter().enumerate() {
                for (theta, r) in spec.vertex_sources(v) {
                    u[k] += val(r.shifted(cell))? * theta;
                }
            }
            let det = triangle_gradient(&spec.triangle_geometry()[t], &u)?.determinant();
            rep.min_det = rep.min_det.min(det);
            if det <= 0.0 {
                rep.reversed_triangles += 1;
            }
            rep.penalty_energy += penalty_weight(spec, t) * pf.value(det);
        }
    }
    rep.holds = rep.max_spring_residual <= tolerance && rep.reversed_triangles == 0;
    Ok(rep)
}
