//! Growth, Lipschitz and rank-one convexity checks on density estimates.

use std::io::Write;

use super::bounds::{BoundConstants, DeformationSampler};
use crate::cellproblem::{effective_density_with_starts, DensityQuery, DensityTable, Start};
use crate::error::{invalid, Result};
use crate::geometry::{singular_values, Mat2, Vec2};
use crate::lattice::LatticeSpec;

/// Growth window `max{C2 (|lambda|^2 - D2), 0} <= W(lambda) <= C1 (2n-1)^2 (|lambda|^2 + 1)`
/// implied by the cell bounds.
pub fn growth_window(spec: &LatticeSpec, bounds: &BoundConstants, lambda: &Mat2) -> (f64, f64) {
    let l2 = lambda.norm_squared();
    let n = spec.reach().n as f64;
    let lower = (bounds.c2 * (l2 - bounds.d2)).max(0.0);
    let upper = bounds.c1 * (2.0 * n - 1.0).powi(2) * (l2 + 1.0);
    (lower, upper)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRow {
    pub lambda: Mat2,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks each `(lambda, estimate)` against [`growth_window`] with absolute slack `1e-10`.
pub fn growth_check(spec: &LatticeSpec, bounds: &BoundConstants, estimates: &[(Mat2, f64)]) -> Vec<GrowthRow> {
    estimates
        .iter()
        .map(|(lambda, value)| {
            let (lower, upper) = growth_window(spec, bounds, lambda);
            let holds = *value >= lower - 1e-10 && *value <= upper + 1e-10;
            GrowthRow { lambda: *lambda, value: *value, lower, upper, holds }
        })
        .collect()
}

/// Lipschitz constant `10 C1 (2n-1)^2` used for `|W(l) - W(m)| <= c (1 + |l| + |m|) |l - m|`.
pub fn lipschitz_constant(spec: &LatticeSpec, bounds: &BoundConstants) -> f64 {
    let n = spec.reach().n as f64;
    10.0 * bounds.c1 * (2.0 * n - 1.0).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzRow {
    pub lambda: Mat2,
    pub mu: Mat2,
    pub w_lambda: f64,
    pub w_mu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    pub constant: f64,
    pub slack: f64,
    pub rows: Vec<LipschitzRow>,
}

impl LipschitzReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda_11", "lambda_12", "lambda_21", "lambda_22", "mu_11", "mu_12", "mu_21", "mu_22", "w_lambda", "w_mu", "lhs", "rhs", "violated"])?;
        for r in &self.rows {
            let mut rec: Vec<String> = mat_fields(&r.lambda);
            rec.extend(mat_fields(&r.mu));
            rec.extend([r.w_lambda, r.w_mu, r.lhs, r.rhs].iter().map(|v| v.to_string()));
            rec.push(r.violated.to_string());
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "lipschitz check: constant {}, slack {}, {} pairs, {} violations (reported, not fatal)\n",
            self.constant,
            self.slack,
            self.rows.len(),
            self.violations()
        )
    }
}

pub(crate) fn mat_fields(m: &Mat2) -> Vec<String> {
    vec![m[(0, 0)].to_string(), m[(0, 1)].to_string(), m[(1, 0)].to_string(), m[(1, 1)].to_string()]
}

/// `count` random gradient pairs with entries from the bound-audit sampler.
pub fn random_gradient_pairs(count: usize, seed: u64) -> Vec<(Mat2, Mat2)> {
    let mut s = DeformationSampler::new(seed);
    (0..count).map(|_| (s.gradient(), s.gradient())).collect()
}

/// Estimates both ends of each pair with the same query settings and records the
/// Lipschitz inequality with slack `2 slack`.
pub fn lipschitz_check(
    spec: &LatticeSpec,
    bounds: &BoundConstants,
    pairs: &[(Mat2, Mat2)],
    query: &DensityQuery,
    slack: f64,
) -> Result<LipschitzReport> {
    let c = lipschitz_constant(spec, bounds);
    let estimate = |l: &Mat2| -> Result<f64> {
        let q = DensityQuery { lambda: *l, ..query.clone() };
        Ok(effective_density_with_starts(spec, &q, &[])?.value())
    };
    let mut rows = Vec::new();
    for (l, m) in pairs {
        let (wl, wm) = (estimate(l)?, estimate(m)?);
        let lhs = (wl - wm).abs();
        let rhs = c * (1.0 + l.norm() + m.norm()) * (l - m).norm() + 2.0 * slack;
        rows.push(LipschitzRow { lambda: *l, mu: *m, w_lambda: wl, w_mu: wm, lhs, rhs, violated: lhs > rhs });
    }
    Ok(LipschitzReport { constant: c, slack, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneRow {
    pub theta: f64,
    pub mix: Mat2,
    pub w_mix: f64,
    /// `theta W(A) + (1 - theta) W(B)`.
    pub chord: f64,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneReport {
    pub a: Mat2,
    pub b: Mat2,
    pub w_a: f64,
    pub w_b: f64,
    pub rows: Vec<RankOneRow>,
}

impl RankOneReport {
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.violation).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["theta", "mix_11", "mix_12", "mix_21", "mix_22", "w_mix", "chord", "violation"])?;
        for r in &self.rows {
            let mut rec = vec![r.theta.to_string()];
            rec.extend(mat_fields(&r.mix));
            rec.extend([r.w_mix, r.chord, r.violation].iter().map(|v| v.to_string()));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "rank-one check: W(A) = {}, W(B) = {}, {} mixes, max violation {}\n",
            self.w_a,
            self.w_b,
            self.rows.len(),
            self.max_violation()
        )
    }
}

/// Rank-one convexity along `A + t a (x) n`, with `B = A + a (x) n`.
pub fn rank_one_convexity_check(
    spec: &LatticeSpec,
    a_mat: &Mat2,
    a: Vec2,
    n: Vec2,
    thetas: &[f64],
    query: &DensityQuery,
) -> Result<RankOneReport> {
    rank_one_check_between(spec, a_mat, &(a_mat + a * n.transpose()), thetas, query)
}

/// Compares `W(theta A + (1 - theta) B)` with the chord for each `theta`.
/// Mixes are seeded with both end minimizers and their interpolation.
pub fn rank_one_check_between(
    spec: &LatticeSpec,
    a: &Mat2,
    b: &Mat2,
    thetas: &[f64],
    query: &DensityQuery,
) -> Result<RankOneReport> {
    let (_, s2) = singular_values(&(b - a));
    if s2 > 1e-12 {
        return Err(invalid(format!("B - A is not rank one (second singular value {s2:e})")));
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(invalid(format!("theta must lie in [0, 1], got {t}")));
    }
    let run = |l: &Mat2, extra: &[Start]| -> Result<DensityTable> {
        effective_density_with_starts(spec, &DensityQuery { lambda: *l, ..query.clone() }, extra)
    };
    let ta = run(a, &[])?;
    let tb = if a == b { ta.clone() } else { run(b, &[])? };
    let (w_a, w_b) = (ta.value(), tb.value());
    let mut rows = Vec::new();
    for &theta in thetas {
        let mix = a * theta + b * (1.0 - theta);
        let w_mix = if mix == *a {
            w_a
        } else if mix == *b {
            w_b
        } else {
            let (pa, pb) = (&ta.best().corrector, &tb.best().corrector);
            let extra = [
                Start { label: "cross:a".into(), corrector: pa.clone() },
                Start { label: "cross:b".into(), corrector: pb.clone() },
                Start { label: "cross:mix".into(), corrector: pb.lerp(pa, theta) },
            ];
            run(&mix, &extra)?.value()
        };
        let chord = theta * w_a + (1.0 - theta) * w_b;
        rows.push(RankOneRow { theta, mix, w_mix, chord, violation: w_mix - chord });
    }
    Ok(RankOneReport { a: *a, b: *b, w_a, w_b, rows })
}
