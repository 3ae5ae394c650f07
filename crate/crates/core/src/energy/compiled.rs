use std::collections::HashMap;

use super::{angle_value, penalty_weight, spring_value, PenaltyFunction};
use crate::error::{Error, Result};
use crate::geometry::{columns, cross, Mat2, Vec2};
use crate::lattice::{AngleForm, Cell, LatticeSpec, NodeRef};

/// Value of a node in a compiled energy: `base + x[var]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slot {
    pub base: Vec2,
    pub var: Option<usize>,
}

#[derive(Clone, Debug)]
struct CSpring {
    a: usize,
    b: usize,
    rest: f64,
    coef: f64,
}

#[derive(Clone, Debug)]
struct CTriangle {
    verts: [Vec<(f64, usize)>; 3],
    pinv: Mat2,
    weight: f64,
}

#[derive(Clone, Debug)]
struct CAngle {
    apex: usize,
    arms: [usize; 2],
    cosine: f64,
    strength: f64,
    form: AngleForm,
}

/// Energy of a fixed list of cells flattened into slot-indexed terms, with
/// node variables laid out as `x[2 v], x[2 v + 1]`.
///
/// Evaluates `energy_scale * E(value_scale * (base + x))` summed over the cells.
#[derive(Clone, Debug)]
pub struct CompiledEnergy {
    slots: Vec<Slot>,
    springs: Vec<CSpring>,
    triangles: Vec<CTriangle>,
    angles: Vec<CAngle>,
    nvars: usize,
    value_scale: f64,
    energy_scale: f64,
}

/// Parts of a compiled evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Parts {
    pub spring: f64,
    pub penalty: f64,
    pub angle: f64,
}

impl Parts {
    pub fn total(&self) -> f64 {
        self.spring + self.penalty + self.angle
    }
}

impl CompiledEnergy {
    pub fn build(
        spec: &LatticeSpec,
        cells: &[Cell],
        nvars: usize,
        value_scale: f64,
        energy_scale: f64,
        mut slot_of: impl FnMut(&NodeRef) -> Result<Slot>,
    ) -> Result<CompiledEnergy> {
        let mut slots = Vec::new();
        let mut index: HashMap<NodeRef, usize> = HashMap::new();
        let mut slot = |r: NodeRef, slots: &mut Vec<Slot>| -> Result<usize> {
            if let Some(&i) = index.get(&r) {
                return Ok(i);
            }
            let s = slot_of(&r)?;
            if let Some(v) = s.var {
                if v >= nvars {
                    return Err(Error::InvalidArgument(format!("variable {v} out of range")));
                }
            }
            slots.push(s);
            index.insert(r, slots.len() - 1);
            Ok(slots.len() - 1)
        };
        let mut springs = Vec::new();
        let mut triangles = Vec::new();
        let mut angles = Vec::new();
        let pinvs: Vec<Mat2> = spec
            .triangle_geometry()
            .iter()
            .map(|x| columns(x[0] - x[1], x[0] - x[2]).try_inverse().expect("validated triangle"))
            .collect();
        for &cell in cells {
            for s in spec.springs() {
                springs.push(CSpring {
                    a: slot(s.ends[0].shifted(cell), &mut slots)?,
                    b: slot(s.ends[1].shifted(cell), &mut slots)?,
                    rest: s.rest_length,
                    coef: s.weight * s.stiffness,
                });
            }
            for &t in spec.penalty_triangles() {
                let mut verts: [Vec<(f64, usize)>; 3] = Default::default();
                for (k, v) in spec.triangles()[t].iter().enumerate() {
                    for (theta, r) in spec.vertex_sources(v) {
                        verts[k].push((theta, slot(r.shifted(cell), &mut slots)?));
                    }
                }
                triangles.push(CTriangle { verts, pinv: pinvs[t], weight: penalty_weight(spec, t) });
            }
            for a in spec.angles() {
                angles.push(CAngle {
                    apex: slot(a.apex.shifted(cell), &mut slots)?,
                    arms: [slot(a.arms[0].shifted(cell), &mut slots)?, slot(a.arms[1].shifted(cell), &mut slots)?],
                    cosine: a.preferred_cosine,
                    strength: a.strength,
                    form: a.form,
                });
            }
        }
        Ok(CompiledEnergy { slots, springs, triangles, angles, nvars, value_scale, energy_scale })
    }

    /// Number of node variables (scalar length `2 * nvars`).
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn values(&self, x: &[f64]) -> Vec<Vec2> {
        self.slots
            .iter()
            .map(|s| {
                let v = match s.var {
                    Some(i) => s.base + Vec2::new(x[2 * i], x[2 * i + 1]),
                    None => s.base,
                };
                v * self.value_scale
            })
            .collect()
    }

    fn triangle_gradient(&self, t: &CTriangle, u: &[Vec2]) -> (Mat2, [Vec2; 3]) {
        let mut w = [Vec2::zeros(); 3];
        for k in 0..3 {
            for &(theta, s) in &t.verts[k] {
                w[k] += u[s] * theta;
            }
        }
        (columns(w[0] - w[1], w[0] - w[2]) * t.pinv, w)
    }

    /// Energy split into its parts.
    pub fn parts(&self, x: &[f64], pf: &PenaltyFunction) -> Result<Parts> {
        let u = self.values(x);
        let mut p = Parts::default();
        for s in &self.springs {
            p.spring += spring_value(u[s.a], u[s.b], s.rest, s.coef);
        }
        for t in &self.triangles {
            let (g, _) = self.triangle_gradient(t, &u);
            p.penalty += t.weight * pf.value(g.determinant());
        }
        for a in &self.angles {
            let o = u[a.apex];
            p.angle += angle_value(u[a.arms[0]] - o, u[a.arms[1]] - o, a.cosine, a.strength, a.form)?;
        }
        p.spring *= self.energy_scale;
        p.penalty *= self.energy_scale;
        p.angle *= self.energy_scale;
        if !p.total().is_finite() {
            return Err(Error::NonFinite(format!("{:?}", p)));
        }
        Ok(p)
    }

    pub fn value(&self, x: &[f64], pf: &PenaltyFunction) -> Result<f64> {
        self.parts(x, pf).map(|p| p.total())
    }

    /// Energy and its gradient with respect to `x` (requires `pf.tau > 0`).
    pub fn value_and_gradient(&self, x: &[f64], pf: &PenaltyFunction, grad: &mut [f64]) -> Result<f64> {
        if pf.tau <= 0.0 {
            return Err(Error::UnsmoothedPenalty);
        }
        let u = self.values(x);
        let mut gu = vec![Vec2::zeros(); u.len()];
        let mut e = 0.0;
        for s in &self.springs {
            let d = u[s.b] - u[s.a];
            let l = d.norm();
            let r = l - s.rest;
            e += s.coef * r * r;
            if l > 0.0 {
                let f = d * (2.0 * s.coef * r / l);
                gu[s.b] += f;
                gu[s.a] -= f;
            }
        }
        for t in &self.triangles {
            let (g, _) = self.triangle_gradient(t, &u);
            let det = g.determinant();
            e += t.weight * pf.value(det);
            let fp = t.weight * pf.derivative(det);
            if fp != 0.0 {
                let cof = Mat2::new(g[(1, 1)], -g[(1, 0)], -g[(0, 1)], g[(0, 0)]);
                let dd = cof * t.pinv.transpose() * fp;
                let c0 = dd.column(0).into_owned();
                let c1 = dd.column(1).into_owned();
                let dw = [c0 + c1, -c0, -c1];
                for k in 0..3 {
                    for &(theta, s) in &t.verts[k] {
                        gu[s] += dw[k] * theta;
                    }
                }
            }
        }
        for a in &self.angles {
            let o = u[a.apex];
            let l1 = u[a.arms[0]] - o;
            let l2 = u[a.arms[1]] - o;
            e += angle_value(l1, l2, a.cosine, a.strength, a.form)?;
            let (g1, g2) = angle_gradient(l1, l2, a.cosine, a.strength, a.form);
            gu[a.arms[0]] += g1;
            gu[a.arms[1]] += g2;
            gu[a.apex] -= g1 + g2;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let k = self.energy_scale * self.value_scale;
        for (s, g) in self.slots.iter().zip(&gu) {
            if let Some(i) = s.var {
                grad[2 * i] += k * g.x;
                grad[2 * i + 1] += k * g.y;
            }
        }
        let e = e * self.energy_scale;
        if !e.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("energy or gradient".into()));
        }
        Ok(e)
    }
}

fn angle_gradient(l1: Vec2, l2: Vec2, cosine: f64, strength: f64, form: AngleForm) -> (Vec2, Vec2) {
    let (n1, n2) = (l1.norm(), l2.norm());
    match form {
        AngleForm::AbsoluteCosine => {
            let g = l1.dot(&l2) - n1 * n2 * cosine;
            let sign = strength * g.signum() * if g == 0.0 { 0.0 } else { 1.0 };
            let d1 = if n1 > 0.0 { l2 - l1 * (n2 * cosine / n1) } else { l2 };
            let d2 = if n2 > 0.0 { l1 - l2 * (n1 * cosine / n2) } else { l1 };
            (d1 * sign, d2 * sign)
        }
        AngleForm::Torsional => {
            if n1 == 0.0 || n2 == 0.0 {
                return (Vec2::zeros(), Vec2::zeros());
            }
            let phi = cross(l1, l2).atan2(l1.dot(&l2));
            let d = phi.abs() - cosine.clamp(-1.0, 1.0).acos();
            let k = 2.0 * strength * d * phi.signum();
            let dphi1 = -Vec2::new(-l1.y, l1.x) / (n1 * n1);
            let dphi2 = Vec2::new(-l2.y, l2.x) / (n2 * n2);
            (dphi1 * k, dphi2 * k)
        }
    }
}
