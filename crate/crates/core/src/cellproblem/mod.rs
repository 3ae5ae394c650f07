//! Upper estimates of the effective energy density by supercell minimization.
//!
//! For a macroscopic gradient `lambda` the objective on a `k x k` supercell is the
//! average cell energy of `lambda x + psi` per unit reference volume, minimized over
//! correctors `psi` that either vanish near the supercell boundary or are
//! `k`-periodic. Every reported number is the exact energy of a feasible corrector,
//! so it is an upper estimate of the density.

mod mechanism;

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{CompiledEnergy, PenaltyFunction, Slot};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ccw, convex_distance, diameter, spectral_norm, Mat2, Vec2};
use crate::lattice::{Cell, LatticeSpec, NodeRef};
use crate::linearize::NodalField;
use crate::optim::{self, LbfgsConfig};

pub use mechanism::{
    accordion_fold_on, accordion_fold_state, alternating_rotation_state, fold_state, mechanism_starts, twisted_kagome_state,
    verify_mechanism, MechanismReport, MechanismState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Corrector vanishes within `d_m` of the supercell boundary.
    ZeroBoundary,
    /// Corrector is `k`-periodic.
    Periodic,
}

impl BoundaryMode {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryMode::ZeroBoundary => "zero-boundary",
            BoundaryMode::Periodic => "periodic",
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub memory: usize,
    pub armijo: f64,
    pub backtrack: f64,
    /// One random start per seed.
    pub seeds: Vec<u64>,
    /// Standard deviation of random starts, relative to the nearest-node distance.
    pub perturbation: f64,
    pub smoothing_tau: f64,
    pub pin_gauge: bool,
    pub mechanism_starts: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let l = LbfgsConfig::default();
        OptimizerConfig {
            max_iterations: l.max_iterations,
            gradient_tolerance: l.gradient_tolerance,
            memory: l.memory,
            armijo: l.armijo,
            backtrack: l.backtrack,
            seeds: (0..8).collect(),
            perturbation: 0.1,
            smoothing_tau: 0.05,
            pin_gauge: true,
            mechanism_starts: true,
        }
    }
}

impl OptimizerConfig {
    /// Default settings with `count` random starts seeded from `base`.
    pub fn with_seeds(base: u64, count: usize) -> Self {
        OptimizerConfig { seeds: (0..count as u64).map(|i| base.wrapping_add(i)).collect(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(invalid("memory must be positive"));
        }
        if !(self.gradient_tolerance >= 0.0) {
            return Err(invalid("gradient_tolerance must be nonnegative"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(invalid("armijo must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack must lie in (0, 1)"));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(invalid("perturbation must be nonnegative"));
        }
        if !(self.smoothing_tau > 0.0 && self.smoothing_tau.is_finite()) {
            return Err(invalid("smoothing_tau must be positive"));
        }
        Ok(())
    }

    pub fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            memory: self.memory,
            armijo: self.armijo,
            backtrack: self.backtrack,
            ..LbfgsConfig::default()
        }
    }
}

/// Nodal corrector on a `k x k` supercell, one value per basic node and cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Corrector {
    pub mode: BoundaryMode,
    pub period: usize,
    values: Vec<Vec2>,
}

impl Corrector {
    pub fn zeros(num_basic: usize, mode: BoundaryMode, period: usize) -> Self {
        Corrector { mode, period, values: vec![Vec2::zeros(); num_basic * period * period] }
    }

    pub fn num_basic(&self) -> usize {
        self.values.len() / (self.period * self.period)
    }

    fn index(&self, basic: usize, cell: [usize; 2]) -> usize {
        (basic * self.period + cell[0]) * self.period + cell[1]
    }

    pub fn get(&self, basic: usize, cell: [usize; 2]) -> Vec2 {
        self.values[self.index(basic, cell)]
    }

    pub fn set(&mut self, basic: usize, cell: [usize; 2], v: Vec2) {
        let i = self.index(basic, cell);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    /// Value at any lattice node: wrapped modulo the period, or zero outside the
    /// supercell in zero-boundary mode.
    pub fn value(&self, r: &NodeRef) -> Vec2 {
        let k = self.period as i64;
        match self.mode {
            BoundaryMode::Periodic => {
                self.get(r.basic, [r.offset[0].rem_euclid(k) as usize, r.offset[1].rem_euclid(k) as usize])
            }
            BoundaryMode::ZeroBoundary => {
                if (0..k).contains(&r.offset[0]) && (0..k).contains(&r.offset[1]) {
                    self.get(r.basic, [r.offset[0] as usize, r.offset[1] as usize])
                } else {
                    Vec2::zeros()
                }
            }
        }
    }

    /// Reads this corrector on a supercell of another size or mode: periodic
    /// correctors are tiled, zero-boundary ones embedded at the corner.
    pub fn resample(&self, mode: BoundaryMode, period: usize) -> Corrector {
        let mut out = Corrector::zeros(self.num_basic(), mode, period);
        for b in 0..self.num_basic() {
            for i in 0..period {
                for j in 0..period {
                    out.set(b, [i, j], self.value(&NodeRef::new(b, [i as i64, j as i64])));
                }
            }
        }
        out
    }

    /// `m * psi` at every node.
    pub fn mapped(&self, m: &Mat2) -> Corrector {
        Corrector { values: self.values.iter().map(|v| m * v).collect(), ..self.clone() }
    }

    /// `psi + c` at every node.
    pub fn shifted(&self, c: Vec2) -> Corrector {
        Corrector { values: self.values.iter().map(|v| v + c).collect(), ..self.clone() }
    }

    /// `(1 - t) self + t other`, with `other` read on this supercell.
    pub fn lerp(&self, other: &Corrector, t: f64) -> Corrector {
        let o = other.resample(self.mode, self.period);
        let values = self.values.iter().zip(&o.values).map(|(a, b)| a * (1.0 - t) + b * t).collect();
        Corrector { values, ..self.clone() }
    }

    /// Writes `basic, i, j, psi1, psi2` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["basic", "i", "j", "psi1", "psi2"])?;
        for b in 0..self.num_basic() {
            for i in 0..self.period {
                for j in 0..self.period {
                    let v = self.get(b, [i, j]);
                    out.write_record(&[b.to_string(), i.to_string(), j.to_string(), v.x.to_string(), v.y.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// The field `epsilon (lambda x + psi)` at the node `x` of the unit lattice.
#[derive(Clone, Copy, Debug)]
pub struct CorrectedField<'a> {
    pub lambda: Mat2,
    pub corrector: &'a Corrector,
    pub epsilon: f64,
}

impl<'a> CorrectedField<'a> {
    pub fn new(lambda: Mat2, corrector: &'a Corrector) -> Self {
        CorrectedField { lambda, corrector, epsilon: 1.0 }
    }
}

impl NodalField for CorrectedField<'_> {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn value(&self, spec: &LatticeSpec, node: &NodeRef) -> Result<Vec2> {
        Ok((self.lambda * spec.position(node) + self.corrector.value(node)) * self.epsilon)
    }
}

/// Free variables of the cell problem on a `k x k` supercell.
#[derive(Clone, Debug)]
pub struct Supercell {
    pub k: usize,
    pub mode: BoundaryMode,
    cells: Vec<Cell>,
    free: Vec<Option<usize>>,
    nfree: usize,
    num_basic: usize,
}

/// Sets up the free variables: nodes farther than `d_m` from the supercell
/// boundary in zero-boundary mode; one node per basic node and cell in periodic
/// mode, less the gauge node (basic node 0 of cell `(0, 0)`) when pinned.
pub fn assemble_supercell(spec: &LatticeSpec, k: usize, mode: BoundaryMode, pin_gauge: bool) -> Result<Supercell> {
    if k == 0 {
        return Err(invalid("supercell size k must be at least 1"));
    }
    let nb = spec.num_basic();
    let mut free = vec![None; nb * k * k];
    let mut nfree = 0;
    let is_free: Box<dyn Fn(usize, [usize; 2]) -> bool> = match mode {
        BoundaryMode::Periodic => Box::new(move |b, a| !(pin_gauge && b == 0 && a == [0, 0])),
        BoundaryMode::ZeroBoundary => {
            let poly = ccw(spec.cell_polygon());
            let d_m = spec.reach().d_m;
            let reach = spectral_norm(spec.basis_inverse()) * (d_m + diameter(&poly));
            let r = reach.ceil() as i64 + 1;
            let ki = k as i64;
            let mut outside = Vec::new();
            for i in -r..ki + r {
                for j in -r..ki + r {
                    if !((0..ki).contains(&i) && (0..ki).contains(&j)) {
                        outside.push(spec.lattice_vector([i, j]));
                    }
                }
            }
            let spec = spec.clone();
            Box::new(move |b, a| {
                let p = spec.position(&NodeRef::new(b, [a[0] as i64, a[1] as i64]));
                let d = outside.iter().map(|t| convex_distance(p - t, &poly)).fold(f64::INFINITY, f64::min);
                d > d_m * (1.0 + 1e-12)
            })
        }
    };
    for b in 0..nb {
        for i in 0..k {
            for j in 0..k {
                if is_free(b, [i, j]) {
                    free[(b * k + i) * k + j] = Some(nfree);
                    nfree += 1;
                }
            }
        }
    }
    let mut cells = Vec::with_capacity(k * k);
    for i in 0..k as i64 {
        for j in 0..k as i64 {
            cells.push([i, j]);
        }
    }
    Ok(Supercell { k, mode, cells, free, nfree, num_basic: nb })
}

impl Supercell {
    pub fn num_free_nodes(&self) -> usize {
        self.nfree
    }

    pub fn num_variables(&self) -> usize {
        2 * self.nfree
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_free(&self, basic: usize, cell: [usize; 2]) -> bool {
        self.free[(basic * self.k + cell[0]) * self.k + cell[1]].is_some()
    }

    fn var_of(&self, r: &NodeRef) -> Option<usize> {
        let k = self.k as i64;
        let a = match self.mode {
            BoundaryMode::Periodic => [r.offset[0].rem_euclid(k), r.offset[1].rem_euclid(k)],
            BoundaryMode::ZeroBoundary => {
                if !((0..k).contains(&r.offset[0]) && (0..k).contains(&r.offset[1])) {
                    return None;
                }
                r.offset
            }
        };
        self.free[(r.basic * self.k + a[0] as usize) * self.k + a[1] as usize]
    }

    /// Average energy of `lambda x + psi` per unit reference volume as a function
    /// of the free variables.
    pub fn objective(&self, spec: &LatticeSpec, lambda: &Mat2) -> Result<CompiledEnergy> {
        if spec.num_basic() != self.num_basic {
            return Err(invalid("supercell was assembled for a different lattice"));
        }
        let scale = 1.0 / ((self.k * self.k) as f64 * spec.cell_area());
        CompiledEnergy::build(spec, &self.cells, self.nfree, 1.0, scale, |r| {
            Ok(Slot { base: lambda * spec.position(r), var: self.var_of(r) })
        })
    }

    /// Free variables of a corrector, after fixing the gauge in periodic mode and
    /// dropping constrained values.
    pub fn variables(&self, c: &Corrector) -> Vec<f64> {
        let c = if c.mode == self.mode && c.period == self.k { c.clone() } else { c.resample(self.mode, self.k) };
        let shift = if self.mode == BoundaryMode::Periodic && !self.is_free(0, [0, 0]) {
            c.get(0, [0, 0])
        } else {
            Vec2::zeros()
        };
        let mut x = vec![0.0; self.num_variables()];
        for b in 0..self.num_basic {
            for i in 0..self.k {
                for j in 0..self.k {
                    if let Some(v) = self.free[(b * self.k + i) * self.k + j] {
                        let w = c.get(b, [i, j]) - shift;
                        x[2 * v] = w.x;
                        x[2 * v + 1] = w.y;
                    }
                }
            }
        }
        x
    }

    pub fn corrector(&self, x: &[f64]) -> Corrector {
        let mut c = Corrector::zeros(self.num_basic, self.mode, self.k);
        for b in 0..self.num_basic {
            for i in 0..self.k {
                for j in 0..self.k {
                    if let Some(v) = self.free[(b * self.k + i) * self.k + j] {
                        c.set(b, [i, j], Vec2::new(x[2 * v], x[2 * v + 1]));
                    }
                }
            }
        }
        c
    }
}

/// A starting corrector for the multistart descent.
#[derive(Clone, Debug, PartialEq)]
pub struct Start {
    pub label: String,
    pub corrector: Corrector,
}

#[derive(Clone, Debug)]
pub struct DensityQuery {
    pub lambda: Mat2,
    pub k_schedule: Vec<usize>,
    pub bc_modes: Vec<BoundaryMode>,
    pub optimizer: OptimizerConfig,
}

impl DensityQuery {
    pub fn new(lambda: Mat2) -> Self {
        DensityQuery {
            lambda,
            k_schedule: vec![1, 2, 3, 4],
            bc_modes: vec![BoundaryMode::ZeroBoundary, BoundaryMode::Periodic],
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().any(|v| !v.is_finite()) {
            return Err(invalid("lambda must be finite"));
        }
        if self.k_schedule.is_empty() {
            return Err(invalid("k_schedule must be nonempty"));
        }
        if self.k_schedule[0] == 0 || self.k_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("k_schedule must be positive and strictly ascending"));
        }
        if self.bc_modes.is_empty() {
            return Err(invalid("bc_modes must be nonempty"));
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub starts_tried: usize,
    pub best_start: String,
}

/// Result of one supercell minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub lambda: Mat2,
    pub k: usize,
    pub mode: BoundaryMode,
    /// Exact average energy at the reported corrector; an upper estimate.
    pub value_exact: f64,
    pub value_smoothed: f64,
    /// Exact average energy at `psi = 0`.
    pub value_zero: f64,
    pub corrector: Corrector,
    pub diagnostics: Diagnostics,
}

impl DensityEstimate {
    pub fn field(&self) -> CorrectedField<'_> {
        CorrectedField::new(self.lambda, &self.corrector)
    }
}

pub(crate) struct RunResult {
    pub x: Vec<f64>,
    pub exact: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

pub(crate) fn run_start(energy: &CompiledEnergy, x0: Vec<f64>, exact: &PenaltyFunction, smooth: &PenaltyFunction, cfg: &LbfgsConfig) -> Result<RunResult> {
    let e0 = energy.value(&x0, exact)?;
    let out = optim::minimize(
        |x, g| match energy.value_and_gradient(x, smooth, g) {
            Err(Error::NonFinite(_)) | Err(Error::ZeroArm) => Ok(f64::INFINITY),
            r => r,
        },
        x0.clone(),
        cfg,
    )?;
    let e1 = match energy.value(&out.x, exact) {
        Ok(v) => v,
        Err(Error::NonFinite(_)) | Err(Error::ZeroArm) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let (x, exact) = if e1 <= e0 { (out.x, e1) } else { (x0, e0) };
    Ok(RunResult { x, exact, iterations: out.iterations, grad_norm: out.grad_norm, converged: out.converged })
}

fn random_start(cell: &Supercell, num_basic: usize, seed: u64, sigma: f64) -> Corrector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut c = Corrector::zeros(num_basic, cell.mode, cell.k);
    for b in 0..num_basic {
        for i in 0..cell.k {
            for j in 0..cell.k {
                c.set(b, [i, j], Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng)));
            }
        }
    }
    c
}

/// Multistart minimization on one supercell. The start set is `psi = 0`, one
/// random start per seed, the registered mechanism states and `extra`.
pub fn solve_cell_problem(
    spec: &LatticeSpec,
    lambda: &Mat2,
    cfg: &OptimizerConfig,
    k: usize,
    mode: BoundaryMode,
    extra: &[Start],
) -> Result<DensityEstimate> {
    cfg.validate()?;
    let cell = assemble_supercell(spec, k, mode, cfg.pin_gauge)?;
    let energy = cell.objective(spec, lambda)?;
    let exact = PenaltyFunction::exact(spec.eta());
    let smooth = PenaltyFunction::smoothed(spec.eta(), cfg.smoothing_tau);
    let nb = spec.num_basic();
    let mut starts = vec![Start { label: "zero".into(), corrector: Corrector::zeros(nb, mode, k) }];
    let sigma = cfg.perturbation * spec.nearest_distance();
    for &s in &cfg.seeds {
        starts.push(Start { label: format!("seed:{s}"), corrector: random_start(&cell, nb, s, sigma) });
    }
    if cfg.mechanism_starts {
        starts.extend(mechanism_starts(spec, lambda, k)?);
    }
    starts.extend(extra.iter().cloned());
    let lb = cfg.lbfgs();
    let results: Vec<Result<RunResult>> = if cell.num_variables() == 0 {
        starts.iter().take(1).map(|s| run_start(&energy, cell.variables(&s.corrector), &exact, &smooth, &lb)).collect()
    } else {
        starts.par_iter().map(|s| run_start(&energy, cell.variables(&s.corrector), &exact, &smooth, &lb)).collect()
    };
    let mut best: Option<(usize, RunResult)> = None;
    let mut value_zero = f64::NAN;
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        if i == 0 {
            value_zero = energy.value(&vec![0.0; cell.num_variables()], &exact)?;
        }
        if best.as_ref().map_or(true, |(_, b)| r.exact < b.exact) {
            best = Some((i, r));
        }
    }
    let (i, r) = best.expect("the zero start is always present");
    if !r.exact.is_finite() {
        return Err(Error::NonFinite(format!("cell problem at k = {k}, {mode}")));
    }
    let starts_tried = if cell.num_variables() == 0 { 1 } else { starts.len() };
    Ok(DensityEstimate {
        lambda: *lambda,
        k,
        mode,
        value_exact: r.exact,
        value_smoothed: energy.value(&r.x, &smooth)?,
        value_zero,
        corrector: cell.corrector(&r.x),
        diagnostics: Diagnostics {
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            converged: r.converged,
            starts_tried,
            best_start: starts[i].label.clone(),
        },
    })
}

/// Minimizes the density objective of `query` on one supercell.
pub fn minimize_density(spec: &LatticeSpec, query: &DensityQuery, k: usize, mode: BoundaryMode) -> Result<DensityEstimate> {
    query.validate()?;
    solve_cell_problem(spec, &query.lambda, &query.optimizer, k, mode, &[])
}

/// Estimates for every `(k, mode)` pair of a query and the best of them.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    pub lambda: Mat2,
    pub rows: Vec<DensityEstimate>,
    pub best: usize,
}

impl DensityTable {
    pub fn best(&self) -> &DensityEstimate {
        &self.rows[self.best]
    }

    pub fn value(&self) -> f64 {
        self.best().value_exact
    }

    pub fn get(&self, k: usize, mode: BoundaryMode) -> Option<&DensityEstimate> {
        self.rows.iter().find(|r| r.k == k && r.mode == mode)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(DENSITY_HEADER)?;
        for r in &self.rows {
            out.write_record(density_record(r))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const DENSITY_HEADER: [&str; 11] = [
    "lambda_11",
    "lambda_12",
    "lambda_21",
    "lambda_22",
    "k",
    "bc",
    "value_exact",
    "value_smoothed",
    "grad_norm",
    "iterations",
    "start_id",
];

/// One CSV record in [`DENSITY_HEADER`] order.
pub fn density_record(r: &DensityEstimate) -> Vec<String> {
    vec![
        r.lambda[(0, 0)].to_string(),
        r.lambda[(0, 1)].to_string(),
        r.lambda[(1, 0)].to_string(),
        r.lambda[(1, 1)].to_string(),
        r.k.to_string(),
        r.mode.to_string(),
        r.value_exact.to_string(),
        r.value_smoothed.to_string(),
        r.diagnostics.grad_norm.to_string(),
        r.diagnostics.iterations.to_string(),
        r.diagnostics.best_start.clone(),
    ]
}

/// Runs every `(k, mode)` pair of the query in ascending `k`, zero-boundary before
/// periodic, warm-starting from earlier minimizers.
pub fn effective_density(spec: &LatticeSpec, query: &DensityQuery) -> Result<DensityTable> {
    effective_density_with_starts(spec, query, &[])
}

/// [`effective_density`] with additional starting correctors, resampled to each
/// supercell.
pub fn effective_density_with_starts(spec: &LatticeSpec, query: &DensityQuery, extra: &[Start]) -> Result<DensityTable> {
    query.validate()?;
    let mut modes = query.bc_modes.clone();
    modes.sort();
    modes.dedup();
    let mut rows: Vec<DensityEstimate> = Vec::new();
    for &k in &query.k_schedule {
        for &mode in &modes {
            let mut starts: Vec<Start> = Vec::new();
            for r in &rows {
                let usable = match (mode, r.mode) {
                    (BoundaryMode::Periodic, BoundaryMode::Periodic) => k % r.k == 0,
                    (BoundaryMode::Periodic, BoundaryMode::ZeroBoundary) => r.k <= k,
                    (BoundaryMode::ZeroBoundary, BoundaryMode::ZeroBoundary) => r.k < k,
                    (BoundaryMode::ZeroBoundary, BoundaryMode::Periodic) => false,
                };
                if usable {
                    starts.push(Start {
                        label: format!("warm:{}:{}", r.mode, r.k),
                        corrector: r.corrector.resample(mode, k),
                    });
                }
            }
            for s in extra {
                starts.push(Start { label: s.label.clone(), corrector: s.corrector.resample(mode, k) });
            }
            rows.push(solve_cell_problem(spec, &query.lambda, &query.optimizer, k, mode, &starts)?);
        }
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.value_exact < rows[best].value_exact {
            best = i;
        }
    }
    Ok(DensityTable { lambda: query.lambda, rows, best })
}

#[cfg(test)]
mod tests;
