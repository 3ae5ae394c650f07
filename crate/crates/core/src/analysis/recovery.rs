//! Recovery-sequence and Dirichlet soft-mode experiments on shrinking lattices.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;

use super::bounds::BoundConstants;
use crate::cellproblem::alternating_rotation_state;
use crate::cellproblem::{run_start, BoundaryMode, Corrector, OptimizerConfig};
use crate::energy::{cells_energy, domain_energy, CompiledEnergy, PenaltyFunction, Slot};
use crate::error::{invalid, Error, Result};
use crate::fit::log_log_slope;
use crate::geometry::{Domain, Mat2, Vec2};
use crate::lattice::{cells_in_domain, Cell, LatticeSpec, Mechanism, NodeRef};
use crate::linearize::NodalField;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub energies: Vec<f64>,
    pub target: f64,
    /// `|energy - target|` per epsilon.
    pub gaps: Vec<f64>,
    /// Log-log slope of gaps against epsilon; `None` when a gap is zero.
    pub fitted_rate: Option<f64>,
}

impl ConvergenceReport {
    fn new(epsilons: Vec<f64>, energies: Vec<f64>, target: f64) -> Self {
        let gaps: Vec<f64> = energies.iter().map(|e| (e - target).abs()).collect();
        let fitted_rate = log_log_slope(&epsilons, &gaps);
        ConvergenceReport { epsilons, energies, target, gaps, fitted_rate }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epsilon", "energy", "target", "gap"])?;
        for i in 0..self.epsilons.len() {
            out.write_record([self.epsilons[i], self.energies[i], self.target, self.gaps[i]].map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// `log10` columns for plotting; zero values give `-inf`.
    pub fn write_plot_data<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["log10_epsilon", "log10_energy", "log10_gap"])?;
        for i in 0..self.epsilons.len() {
            out.write_record([self.epsilons[i], self.energies[i], self.gaps[i]].map(|v| v.log10().to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("target {}\n", self.target);
        for i in 0..self.epsilons.len() {
            s += &format!("epsilon {}: energy {}, gap {}\n", self.epsilons[i], self.energies[i], self.gaps[i]);
        }
        match self.fitted_rate {
            Some(r) => s += &format!("fitted gap rate {r} (threshold 0.9 is a chosen acceptance level)\n"),
            None => s += "fitted gap rate undefined (zero gap)\n",
        }
        s
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(invalid("epsilon list must be nonempty"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid("epsilons must be positive and finite"));
    }
    if epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid("epsilons must be strictly descending"));
    }
    Ok(())
}

/// Average energy per unit volume of `lambda x + psi` over the corrector's supercell.
pub fn corrected_average(spec: &LatticeSpec, lambda: &Mat2, psi: &Corrector) -> Result<f64> {
    let k = psi.period as i64;
    let cells: Vec<Cell> = (0..k).flat_map(|i| (0..k).map(move |j| [i, j])).collect();
    let field = crate::cellproblem::CorrectedField::new(*lambda, psi);
    let e = cells_energy(&field, spec, &PenaltyFunction::exact(spec.eta()), &cells)?;
    Ok(e.total.total / ((k * k) as f64 * spec.cell_area()))
}

/// `eps (lambda x + psi(x))` on the unit lattice: periodic `psi` everywhere,
/// zero-boundary `psi` repeated on the supercell tiles listed in `tiles`.
struct RecoveryField<'a> {
    lambda: Mat2,
    psi: &'a Corrector,
    tiles: Option<BTreeSet<Cell>>,
    epsilon: f64,
}

impl NodalField for RecoveryField<'_> {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn value(&self, spec: &LatticeSpec, node: &NodeRef) -> Result<Vec2> {
        let k = self.psi.period as i64;
        let corr = match &self.tiles {
            None => self.psi.value(node),
            Some(tiles) => {
                let t = [node.offset[0].div_euclid(k), node.offset[1].div_euclid(k)];
                if tiles.contains(&t) {
                    self.psi.value(&NodeRef::new(node.basic, [node.offset[0] - t[0] * k, node.offset[1] - t[1] * k]))
                } else {
                    Vec2::zeros()
                }
            }
        };
        Ok((self.lambda * spec.position(node) + corr) * self.epsilon)
    }
}

/// Energies `E_eps(u_eps, domain)` of `u_eps(x) = lambda x + eps psi(x / eps)`
/// against the target `|domain| W`, with `W` the supercell average of `lambda x + psi`.
pub fn recovery_sequence_energy(
    spec: &LatticeSpec,
    lambda: &Mat2,
    psi: &Corrector,
    domain: &Domain,
    epsilons: &[f64],
) -> Result<ConvergenceReport> {
    check_epsilons(epsilons)?;
    domain.validate()?;
    let target = domain.area() * corrected_average(spec, lambda, psi)?;
    let pf = PenaltyFunction::exact(spec.eta());
    let energies = epsilons
        .par_iter()
        .map(|&eps| {
            let tiles = match psi.mode {
                BoundaryMode::Periodic => None,
                BoundaryMode::ZeroBoundary => {
                    let cells = cells_in_domain(spec, domain, eps)?;
                    let k = psi.period as i64;
                    let mut count: BTreeMap<Cell, i64> = BTreeMap::new();
                    for c in &cells.offsets {
                        *count.entry([c[0].div_euclid(k), c[1].div_euclid(k)]).or_insert(0) += 1;
                    }
                    Some(count.into_iter().filter(|(_, n)| *n == k * k).map(|(t, _)| t).collect())
                }
            };
            let field = RecoveryField { lambda: *lambda, psi, tiles, epsilon: eps };
            Ok(domain_energy(&field, spec, &pf, domain)?.total.total)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceReport::new(epsilons.to_vec(), energies, target))
}

/// Per-epsilon detail of a soft-mode run.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftModeRow {
    pub epsilon: f64,
    pub cells: usize,
    pub free_nodes: usize,
    /// Energy of `F x`.
    pub baseline: f64,
    pub energy: f64,
    pub best_start: String,
    /// `C2 (|F|^2 - D2) |Omega'|`, with `Omega'` the union of the scaled cells.
    pub jensen_floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftModeReport {
    pub f: Mat2,
    pub rows: Vec<SoftModeRow>,
    /// Target 0.
    pub convergence: ConvergenceReport,
}

impl SoftModeReport {
    pub fn nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy <= w[0].energy)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epsilon", "cells", "free_nodes", "baseline", "energy", "jensen_floor", "start_id"])?;
        for r in &self.rows {
            out.write_record([
                r.epsilon.to_string(),
                r.cells.to_string(),
                r.free_nodes.to_string(),
                r.baseline.to_string(),
                r.energy.to_string(),
                r.jensen_floor.map_or(String::new(), |v| v.to_string()),
                r.best_start.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "soft mode F = [[{}, {}], [{}, {}]]\n",
            self.f[(0, 0)],
            self.f[(0, 1)],
            self.f[(1, 0)],
            self.f[(1, 1)]
        );
        for r in &self.rows {
            s += &format!(
                "epsilon {}: energy {} (baseline {}), floor {}, start {}\n",
                r.epsilon,
                r.energy,
                r.baseline,
                r.jensen_floor.map_or("n/a".to_string(), |v| v.to_string()),
                r.best_start
            );
        }
        s += &format!("nonincreasing: {}\n", self.nonincreasing());
        s
    }
}

/// Minimizes `E_eps(u, domain)` over `u` equal to `F x` at nodes within
/// `eps d_m` of the boundary, for each epsilon.
pub fn soft_mode_experiment(
    spec: &LatticeSpec,
    f: &Mat2,
    domain: &Domain,
    epsilons: &[f64],
    cfg: &OptimizerConfig,
    bounds: Option<&BoundConstants>,
) -> Result<SoftModeReport> {
    check_epsilons(epsilons)?;
    domain.validate()?;
    cfg.validate()?;
    let rows = epsilons
        .iter()
        .map(|&eps| soft_mode_row(spec, f, domain, eps, cfg, bounds))
        .collect::<Result<Vec<_>>>()?;
    let energies = rows.iter().map(|r| r.energy).collect();
    Ok(SoftModeReport { f: *f, rows, convergence: ConvergenceReport::new(epsilons.to_vec(), energies, 0.0) })
}

fn soft_mode_row(
    spec: &LatticeSpec,
    f: &Mat2,
    domain: &Domain,
    eps: f64,
    cfg: &OptimizerConfig,
    bounds: Option<&BoundConstants>,
) -> Result<SoftModeRow> {
    let cells = cells_in_domain(spec, domain, eps)?.offsets;
    let layer = eps * spec.reach().d_m * (1.0 + 1e-12);
    let mut free: BTreeMap<NodeRef, usize> = BTreeMap::new();
    let support = spec.window_support(&cells);
    for r in &support {
        if domain.inner_distance(spec.position(r) * eps) > layer {
            let n = free.len();
            free.insert(*r, n);
        }
    }
    let nvars = 2 * free.len();
    let energy = CompiledEnergy::build(spec, &cells, nvars, 1.0 / eps, eps * eps, |r| {
        Ok(Slot { base: f * spec.position(r) * eps, var: free.get(r).copied() })
    })?;
    let exact = PenaltyFunction::exact(spec.eta());
    let smooth = PenaltyFunction::smoothed(spec.eta(), cfg.smoothing_tau);
    let x0 = vec![0.0; nvars];
    let baseline = energy.value(&x0, &exact)?;

    let mut starts: Vec<(String, Vec<f64>)> = vec![("affine".into(), x0)];
    if cfg.mechanism_starts {
        for (label, lambda, psi) in rotation_states(spec, f)? {
            let ramps = [("hard", 0.0), ("ramped", 0.5 * eps.sqrt())];
            for (kind, width) in ramps {
                let mut x = vec![0.0; nvars];
                for (r, &v) in &free {
                    let p = spec.position(r) * eps;
                    let w = if width > 0.0 { ((domain.inner_distance(p) - layer) / width).clamp(0.0, 1.0) } else { 1.0 };
                    let target = (lambda * spec.position(r) + psi.value(r)) * eps;
                    let d = (target - f * p) * w;
                    x[2 * v] = d.x;
                    x[2 * v + 1] = d.y;
                }
                starts.push((format!("{label}:{kind}"), x));
            }
        }
    }
    let lb = cfg.lbfgs();
    let results = starts
        .par_iter()
        .map(|(_, x)| run_start(&energy, x.clone(), &exact, &smooth, &lb))
        .collect::<Vec<_>>();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        if best.map_or(true, |(_, b)| r.exact < b) {
            best = Some((i, r.exact));
        }
    }
    let (i, value) = best.expect("the affine start is always present");
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("soft-mode minimization at epsilon {eps}")));
    }
    let jensen_floor = match bounds {
        Some(b) if spec.ghosts().is_empty() => {
            Some(b.c2 * (f.norm_squared() - b.d2) * cells.len() as f64 * eps * eps * spec.cell_area())
        }
        _ => None,
    };
    Ok(SoftModeRow {
        epsilon: eps,
        cells: cells.len(),
        free_nodes: free.len(),
        baseline,
        energy: value,
        best_start: starts[i].0.clone(),
        jensen_floor,
    })
}

/// Alternating-rotation states with gradient `F` when `F` is a scaled rotation
/// with scale in `(0, 1)`.
fn rotation_states(spec: &LatticeSpec, f: &Mat2) -> Result<Vec<(String, Mat2, Corrector)>> {
    let mut out = Vec::new();
    if !spec.mechanisms().iter().any(|m| matches!(m, Mechanism::AlternatingRotation { .. })) {
        return Ok(out);
    }
    let a = (f[(0, 0)] + f[(1, 1)]) / 2.0;
    let b = (f[(1, 0)] - f[(0, 1)]) / 2.0;
    let c = a.hypot(b);
    if !(c > 0.0 && c < 1.0) {
        return Ok(out);
    }
    let phi = b.atan2(a);
    for (sign, theta) in [("+", c.acos()), ("-", -c.acos())] {
        let s = alternating_rotation_state(spec, phi, theta)?;
        out.push((format!("mechanism:rotation{sign}"), s.lambda, s.corrector));
    }
    Ok(out)
}
