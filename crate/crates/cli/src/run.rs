//! Task execution and result files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};
use springlattice::analysis::{
    bounds_audit, cell_bound_constants, lipschitz_check, random_gradient_pairs, rank_one_convexity_check,
    recovery_sequence_energy, soft_mode_experiment,
};
use springlattice::cellproblem::{
    accordion_fold_on, alternating_rotation_state, density_record, effective_density, fold_state, solve_cell_problem,
    verify_mechanism, MechanismState, DENSITY_HEADER,
};
use springlattice::lattice::LatticeSpec;
use springlattice::linearize::interpolation_estimate_report;

use crate::config::{
    fraction, load_lattice, matrix, parse_config, query, twist_in_range, validate_task, CorrectorSource,
    MechanismChoice, RunConfig, TaskConfig,
};

/// Builds the state a mechanism task verifies.
pub fn mechanism_state(spec: &LatticeSpec, m: &MechanismChoice) -> springlattice::Result<MechanismState> {
    use springlattice::Error;
    match m {
        MechanismChoice::TwistedKagome { theta } => {
            if !twist_in_range(*theta) {
                return Err(Error::InvalidArgument(format!("twist angle must lie in (-pi/3, pi/3), got {theta}")));
            }
            alternating_rotation_state(spec, *theta, *theta)
        }
        MechanismChoice::AlternatingRotation { phi, theta } => alternating_rotation_state(spec, *phi, *theta),
        MechanismChoice::Accordion { c } => {
            let (p, q) = fraction(*c).ok_or_else(|| {
                Error::InvalidArgument(format!("fold ratio {c} is not a fraction in [0, 1] with denominator <= 1000"))
            })?;
            accordion_fold_on(spec, p, q)
        }
        MechanismChoice::Fold { k, forward, axis } => fold_state(spec, *k, *forward, *axis),
    }
}

/// In-memory results of one task.
pub struct TaskOutput {
    pub csv: Vec<u8>,
    pub summary: String,
    pub plot: Option<Vec<u8>>,
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> springlattice::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut b = Vec::new();
    f(&mut b)?;
    Ok(b)
}

fn fmt_matrix(m: &springlattice::geometry::Mat2) -> String {
    format!("[[{}, {}], [{}, {}]]", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Runs one validated task.
pub fn execute(spec: &LatticeSpec, task: &TaskConfig, seeds: &[u64]) -> anyhow::Result<TaskOutput> {
    let seed0 = seeds[0];
    Ok(match task {
        TaskConfig::Density(t) => {
            let mut rows = Vec::new();
            let mut summary = String::new();
            for l in t.gradients() {
                let table = effective_density(spec, &query(l, &t.k_schedule, &t.bc_modes, &t.optimizer, seeds))?;
                let b = table.best();
                summary += &format!(
                    "lambda {}: W = {} (k = {}, {}, start {})\n",
                    fmt_matrix(&l),
                    b.value_exact,
                    b.k,
                    b.mode,
                    b.diagnostics.best_start
                );
                rows.push(density_record(b));
            }
            TaskOutput { csv: csv_rows(&DENSITY_HEADER, rows)?, summary, plot: None }
        }
        TaskConfig::MechanismVerify(t) => {
            let state = mechanism_state(spec, &t.mechanism)?;
            let rep = verify_mechanism(spec, &state.field(), &state.period_cells(), t.tolerance)?;
            let row = vec![
                fmt_matrix(&state.lambda),
                format!("{}x{}", state.period[0], state.period[1]),
                rep.max_spring_residual.to_string(),
                rep.min_det.to_string(),
                rep.reversed_triangles.to_string(),
                rep.spring_energy.to_string(),
                rep.penalty_energy.to_string(),
                rep.holds.to_string(),
            ];
            let header = [
                "lambda",
                "period",
                "max_spring_residual",
                "min_det",
                "reversed_triangles",
                "spring_energy",
                "penalty_energy",
                "holds",
            ];
            TaskOutput { csv: csv_rows(&header, [row])?, summary: rep.summary() + "\n", plot: None }
        }
        TaskConfig::BoundsAudit(t) => {
            let audit = bounds_audit(spec, t.samples, t.seed.unwrap_or(seed0))?;
            TaskOutput { csv: buffer(|b| audit.write_csv(b))?, summary: audit.summary(), plot: None }
        }
        TaskConfig::RankOne(t) => {
            let q = query(matrix(&t.a), &t.k_schedule, &t.bc_modes, &t.optimizer, seeds);
            let a = springlattice::geometry::Vec2::new(t.direction[0], t.direction[1]);
            let n = springlattice::geometry::Vec2::new(t.normal[0], t.normal[1]);
            let rep = rank_one_convexity_check(spec, &q.lambda, a, n, &t.thetas, &q)?;
            TaskOutput {
                csv: buffer(|b| rep.write_csv(b))?,
                summary: rep.summary() + "violations measure optimizer slack as well as convexity\n",
                plot: None,
            }
        }
        TaskConfig::Lipschitz(t) => {
            let bounds = cell_bound_constants(spec)?;
            let pairs = random_gradient_pairs(t.pairs, t.seed.unwrap_or(seed0));
            let q = query(springlattice::geometry::Mat2::identity(), &t.k_schedule, &t.bc_modes, &t.optimizer, seeds);
            let rep = lipschitz_check(spec, &bounds, &pairs, &q, t.slack)?;
            TaskOutput { csv: buffer(|b| rep.write_csv(b))?, summary: rep.summary(), plot: None }
        }
        TaskConfig::Recovery(t) => {
            let (lambda, psi) = match &t.corrector {
                CorrectorSource::Zero => {
                    let l = matrix(t.lambda.as_ref().expect("validated"));
                    (l, springlattice::cellproblem::Corrector::zeros(
                        spec.num_basic(),
                        springlattice::cellproblem::BoundaryMode::Periodic,
                        1,
                    ))
                }
                CorrectorSource::TwistedKagome { theta } => {
                    let s = mechanism_state(spec, &MechanismChoice::TwistedKagome { theta: *theta })?;
                    (s.lambda, s.corrector)
                }
                CorrectorSource::AlternatingRotation { phi, theta } => {
                    let s = alternating_rotation_state(spec, *phi, *theta)?;
                    (s.lambda, s.corrector)
                }
                CorrectorSource::Minimized { k, bc, optimizer } => {
                    let l = matrix(t.lambda.as_ref().expect("validated"));
                    let q = query(l, &[*k], &[*bc], optimizer, seeds);
                    let est = solve_cell_problem(spec, &l, &q.optimizer, *k, *bc, &[])?;
                    (l, est.corrector)
                }
            };
            let rep = recovery_sequence_energy(spec, &lambda, &psi, &t.domain, &t.epsilons)?;
            TaskOutput {
                csv: buffer(|b| rep.write_csv(b))?,
                summary: format!("lambda {}\n", fmt_matrix(&lambda)) + &rep.summary(),
                plot: Some(buffer(|b| rep.write_plot_data(b))?),
            }
        }
        TaskConfig::SoftMode(t) => {
            let bounds = if t.jensen_floor { cell_bound_constants(spec).ok() } else { None };
            let cfg = springlattice::cellproblem::OptimizerConfig { seeds: seeds.to_vec(), ..t.optimizer.clone() };
            let rep = soft_mode_experiment(spec, &matrix(&t.f), &t.domain, &t.epsilons, &cfg, bounds.as_ref())?;
            TaskOutput {
                csv: buffer(|b| rep.write_csv(b))?,
                summary: rep.summary(),
                plot: Some(buffer(|b| rep.convergence.write_plot_data(b))?),
            }
        }
        TaskConfig::InterpolationReport(t) => {
            let f = t.function.clone();
            let rep = interpolation_estimate_report(move |x| f.eval(x), t.function.lipschitz(), spec, &t.domain, &t.epsilons)?;
            let slope = |s: Option<f64>| s.map_or("undefined".to_string(), |v| v.to_string());
            let summary = format!(
                "gradient ratio slope {}\nerror ratio slope {}\n",
                slope(rep.gradient_slope),
                slope(rep.error_slope)
            );
            TaskOutput { csv: buffer(|b| rep.write_csv(b))?, summary, plot: None }
        }
    })
}

#[derive(Serialize)]
struct Manifest {
    config_sha256: String,
    lattice: String,
    seeds: Vec<u64>,
    versions: Versions,
    tasks: Vec<ManifestTask>,
}

#[derive(Serialize)]
struct Versions {
    springlattice: &'static str,
    #[serde(rename = "springlattice-cli")]
    cli: &'static str,
}

#[derive(Serialize)]
struct ManifestTask {
    index: usize,
    kind: &'static str,
    files: Vec<String>,
}

/// Options given on the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// Replaces the seeds with `seed, seed + 1, ...` (same count).
    pub seed: Option<u64>,
}

/// Loads, validates and runs a config file. Returns the output directory.
pub fn run(config_path: &Path, opts: &RunOptions) -> anyhow::Result<PathBuf> {
    let text = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg: RunConfig = parse_config(&text)?;
    let mut seeds = cfg.seeds.clone();
    if seeds.is_empty() {
        bail!("seeds: must list at least one seed");
    }
    if let Some(s) = opts.seed {
        seeds = (0..seeds.len() as u64).map(|i| s + i).collect();
    }
    let out = match (&opts.output_dir, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => bail!("output_dir: not set in the config or with --output-dir"),
    };
    let spec = load_lattice(&cfg.lattice, base)?;
    for (i, t) in cfg.tasks.iter().enumerate() {
        validate_task(&spec, t, i, &seeds)?;
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut tasks = Vec::new();
    for (i, t) in cfg.tasks.iter().enumerate() {
        let result = execute(&spec, t, &seeds).with_context(|| format!("tasks[{i}] ({})", t.kind()))?;
        let stem = format!("{i:02}-{}", t.kind());
        let mut files = vec![format!("{stem}.csv"), format!("{stem}.txt")];
        fs::write(out.join(&files[0]), &result.csv)?;
        fs::write(out.join(&files[1]), result.summary.as_bytes())?;
        if let Some(plot) = &result.plot {
            files.push(format!("{stem}.plot.csv"));
            fs::write(out.join(&files[2]), plot)?;
        }
        tasks.push(ManifestTask { index: i, kind: t.kind(), files });
    }
    let manifest = Manifest {
        config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        lattice: cfg.lattice.clone(),
        seeds,
        versions: Versions { springlattice: springlattice::VERSION, cli: env!("CARGO_PKG_VERSION") },
        tasks,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(out)
}

/// One line per catalog lattice.
pub fn catalog_listing() -> String {
    let mut s = String::new();
    for e in springlattice::lattice::catalog() {
        s += &format!(
            "{:<18} {} nodes, {} springs/cell, {} triangles: {}\n",
            e.name,
            e.spec.num_basic(),
            e.spec.springs().len(),
            e.spec.triangles().len(),
            e.summary
        );
    }
    s
}
