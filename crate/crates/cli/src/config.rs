//! Run configuration: the lattice, the seeds and a list of tasks.

use std::f64::consts::FRAC_PI_3;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use springlattice::analysis::cell_bound_constants;
use springlattice::cellproblem::{BoundaryMode, DensityQuery, OptimizerConfig};
use springlattice::geometry::{rotation, Domain, Mat2, Vec2};
use springlattice::lattice::{catalog_names, LatticeDescription, LatticeSpec};

/// A 2x2 matrix written as rows `[[a11, a12], [a21, a22]]`.
pub type Rows = [[f64; 2]; 2];

pub fn matrix(r: &Rows) -> Mat2 {
    Mat2::new(r[0][0], r[0][1], r[1][0], r[1][1])
}

fn vector(v: &[f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn default_seeds() -> Vec<u64> {
    (0..8).collect()
}

fn default_k_schedule() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_bc_modes() -> Vec<BoundaryMode> {
    vec![BoundaryMode::ZeroBoundary, BoundaryMode::Periodic]
}

fn default_samples() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_pairs() -> usize {
    10
}

fn default_slack() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog name, or a lattice file path relative to the config file.
    pub lattice: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Optimizer seeds for every task; the first also seeds the samplers.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    Density(DensityTask),
    MechanismVerify(MechanismTask),
    BoundsAudit(BoundsTask),
    RankOne(RankOneTask),
    Lipschitz(LipschitzTask),
    Recovery(RecoveryTask),
    SoftMode(SoftModeTask),
    InterpolationReport(InterpolationTask),
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Density(_) => "density",
            TaskConfig::MechanismVerify(_) => "mechanism-verify",
            TaskConfig::BoundsAudit(_) => "bounds-audit",
            TaskConfig::RankOne(_) => "rank-one",
            TaskConfig::Lipschitz(_) => "lipschitz",
            TaskConfig::Recovery(_) => "recovery",
            TaskConfig::SoftMode(_) => "soft-mode",
            TaskConfig::InterpolationReport(_) => "interpolation-report",
        }
    }
}

/// `c R(theta)` for every `c` and `theta`, `c` varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledRotationGrid {
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityTask {
    #[serde(default)]
    pub lambdas: Vec<Rows>,
    #[serde(default)]
    pub grid: Option<ScaledRotationGrid>,
    #[serde(default = "default_k_schedule")]
    pub k_schedule: Vec<usize>,
    #[serde(default = "default_bc_modes")]
    pub bc_modes: Vec<BoundaryMode>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl DensityTask {
    /// Explicit gradients followed by the grid.
    pub fn gradients(&self) -> Vec<Mat2> {
        let mut out: Vec<Mat2> = self.lambdas.iter().map(matrix).collect();
        if let Some(g) = &self.grid {
            for &c in &g.c {
                for &t in &g.theta {
                    out.push(rotation(t) * c);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MechanismChoice {
    TwistedKagome { theta: f64 },
    AlternatingRotation { phi: f64, theta: f64 },
    /// Accordion fold with gradient `diag(c, 1)`; `c` must be a fraction with denominator at most 1000.
    Accordion { c: f64 },
    Fold { k: usize, forward: usize, axis: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismTask {
    pub mechanism: MechanismChoice,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsTask {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOneTask {
    pub a: Rows,
    /// `B = A + direction (x) normal`.
    pub direction: [f64; 2],
    pub normal: [f64; 2],
    pub thetas: Vec<f64>,
    #[serde(default = "default_k_schedule")]
    pub k_schedule: Vec<usize>,
    #[serde(default = "default_bc_modes")]
    pub bc_modes: Vec<BoundaryMode>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzTask {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_k_schedule")]
    pub k_schedule: Vec<usize>,
    #[serde(default = "default_bc_modes")]
    pub bc_modes: Vec<BoundaryMode>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorrectorSource {
    #[default]
    Zero,
    TwistedKagome {
        theta: f64,
    },
    AlternatingRotation {
        phi: f64,
        theta: f64,
    },
    /// Minimizer of the cell problem on a `k` supercell.
    Minimized {
        k: usize,
        #[serde(default = "periodic")]
        bc: BoundaryMode,
        #[serde(default)]
        optimizer: OptimizerConfig,
    },
}

fn periodic() -> BoundaryMode {
    BoundaryMode::Periodic
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryTask {
    /// Required for `zero` and `minimized` correctors; mechanisms carry their own.
    #[serde(default)]
    pub lambda: Option<Rows>,
    #[serde(default)]
    pub corrector: CorrectorSource,
    pub domain: Domain,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftModeTask {
    pub f: Rows,
    pub domain: Domain,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Report the lower floor from the cell bounds when the lattice has a decomposition.
    #[serde(default = "yes")]
    pub jensen_floor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    Affine {
        matrix: Rows,
        #[serde(default)]
        offset: [f64; 2],
    },
    /// `x + a (sin(w y), sin(w x))`.
    Sine { amplitude: f64, frequency: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: Vec2) -> Vec2 {
        match self {
            TestFunction::Affine { matrix: m, offset } => matrix(m) * x + vector(offset),
            TestFunction::Sine { amplitude, frequency } => {
                x + Vec2::new((frequency * x.y).sin(), (frequency * x.x).sin()) * *amplitude
            }
        }
    }

    /// An upper bound on the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::Affine { matrix: m, .. } => springlattice::geometry::spectral_norm(&matrix(m)),
            TestFunction::Sine { amplitude, frequency } => 1.0 + (amplitude * frequency).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationTask {
    pub function: TestFunction,
    pub domain: Domain,
    pub epsilons: Vec<f64>,
}

/// A configuration problem located by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError { path: path.into(), message: message.to_string() }
}

fn located<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let p = e.path().to_string();
        let path = match (prefix.is_empty(), p == ".") {
            (true, true) => "<config>".to_string(),
            (true, false) => p,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{p}"),
        };
        err(path, e.into_inner().message())
    })
}

const TASK_KINDS: [&str; 8] = [
    "density",
    "mechanism-verify",
    "bounds-audit",
    "rank-one",
    "lipschitz",
    "recovery",
    "soft-mode",
    "interpolation-report",
];

fn parse_task(value: toml::Value, i: usize) -> Result<TaskConfig, ConfigError> {
    let at = format!("tasks[{i}]");
    let toml::Value::Table(mut t) = value else {
        return Err(err(at, "expected a table"));
    };
    let kind = match t.remove("kind") {
        Some(toml::Value::String(k)) => k,
        Some(_) => return Err(err(format!("{at}.kind"), "expected a string")),
        None => return Err(err(format!("{at}.kind"), "missing field `kind`")),
    };
    let v = toml::Value::Table(t);
    Ok(match kind.as_str() {
        "density" => TaskConfig::Density(located(v, &at)?),
        "mechanism-verify" => TaskConfig::MechanismVerify(located(v, &at)?),
        "bounds-audit" => TaskConfig::BoundsAudit(located(v, &at)?),
        "rank-one" => TaskConfig::RankOne(located(v, &at)?),
        "lipschitz" => TaskConfig::Lipschitz(located(v, &at)?),
        "recovery" => TaskConfig::Recovery(located(v, &at)?),
        "soft-mode" => TaskConfig::SoftMode(located(v, &at)?),
        "interpolation-report" => TaskConfig::InterpolationReport(located(v, &at)?),
        other => {
            return Err(err(
                format!("{at}.kind"),
                format!("unknown task kind `{other}`, expected one of {}", TASK_KINDS.join(", ")),
            ))
        }
    })
}

/// Parses a config, reporting the path of the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e: toml::de::Error| err("<config>", e.message()))?;
    let tasks = match table.remove("tasks") {
        None => Vec::new(),
        Some(toml::Value::Array(a)) => a.into_iter().enumerate().map(|(i, v)| parse_task(v, i)).collect::<Result<_, _>>()?,
        Some(_) => return Err(err("tasks", "expected an array of tables")),
    };
    let cfg: RunConfig = located(toml::Value::Table(table), "")?;
    Ok(RunConfig { tasks, ..cfg })
}

/// Resolves the lattice: a catalog name, else a file relative to `base`.
pub fn load_lattice(name: &str, base: &Path) -> Result<LatticeSpec, ConfigError> {
    if catalog_names().contains(&name) {
        return LatticeSpec::from_catalog(name).map_err(|e| err("lattice", e));
    }
    let path = base.join(name);
    if !path.is_file() {
        return Err(err(
            "lattice",
            format!("`{name}` is neither a catalog lattice ({}) nor a file", catalog_names().join(", ")),
        ));
    }
    let desc = LatticeDescription::from_path(&path).map_err(|e| err("lattice", e))?;
    LatticeSpec::build(desc).map_err(|e| err("lattice", e))
}

/// The query used by density-based tasks, with the run seeds.
pub fn query(lambda: Mat2, k: &[usize], bc: &[BoundaryMode], opt: &OptimizerConfig, seeds: &[u64]) -> DensityQuery {
    DensityQuery {
        lambda,
        k_schedule: k.to_vec(),
        bc_modes: bc.to_vec(),
        optimizer: OptimizerConfig { seeds: seeds.to_vec(), ..opt.clone() },
    }
}

/// `p / q` equal to `c` with the smallest denominator up to 1000.
pub fn fraction(c: f64) -> Option<(u64, u64)> {
    if !(0.0..=1.0).contains(&c) {
        return None;
    }
    (1..=1000u64).find_map(|q| {
        let p = (c * q as f64).round();
        ((c * q as f64 - p).abs() <= 1e-12 * q as f64).then_some((p as u64, q))
    })
}

fn finite(path: &str, values: impl IntoIterator<Item = f64>) -> Result<(), ConfigError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(err(path, "values must be finite"))
    }
}

fn rows(r: &Rows) -> impl Iterator<Item = f64> + '_ {
    r.iter().flatten().copied()
}

fn epsilons(path: &str, e: &[f64]) -> Result<(), ConfigError> {
    if e.is_empty() {
        return Err(err(path, "must list at least one epsilon"));
    }
    if e.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(err(path, "epsilons must be positive and finite"));
    }
    if e.windows(2).any(|w| w[0] <= w[1]) {
        return Err(err(path, "epsilons must be strictly descending"));
    }
    Ok(())
}

fn domain(path: &str, d: &Domain) -> Result<(), ConfigError> {
    d.validate().map_err(|e| err(path, e))
}

fn check_query(path: &str, q: &DensityQuery) -> Result<(), ConfigError> {
    q.validate().map_err(|e| err(path, e))
}

/// Checks every precondition of a task that can be checked without running it.
pub fn validate_task(spec: &LatticeSpec, task: &TaskConfig, i: usize, seeds: &[u64]) -> Result<(), ConfigError> {
    let p = |field: &str| format!("tasks[{i}].{field}");
    match task {
        TaskConfig::Density(t) => {
            for (j, l) in t.lambdas.iter().enumerate() {
                finite(&p(&format!("lambdas[{j}]")), rows(l))?;
            }
            if let Some(g) = &t.grid {
                finite(&p("grid"), g.c.iter().chain(&g.theta).copied())?;
                if g.c.is_empty() || g.theta.is_empty() {
                    return Err(err(p("grid"), "c and theta must both be nonempty"));
                }
            }
            if t.gradients().is_empty() {
                return Err(err(p("lambdas"), "no gradients given (set lambdas or grid)"));
            }
            check_query(&p("k_schedule"), &query(Mat2::identity(), &t.k_schedule, &t.bc_modes, &t.optimizer, seeds))
        }
        TaskConfig::MechanismVerify(t) => {
            if !(t.tolerance >= 0.0) {
                return Err(err(p("tolerance"), "must be nonnegative"));
            }
            crate::run::mechanism_state(spec, &t.mechanism).map(|_| ()).map_err(|e| err(p("mechanism"), e))
        }
        TaskConfig::BoundsAudit(t) => {
            if t.samples == 0 {
                return Err(err(p("samples"), "must be at least 1"));
            }
            cell_bound_constants(spec).map(|_| ()).map_err(|e| err(format!("tasks[{i}]"), e))
        }
        TaskConfig::RankOne(t) => {
            finite(&p("a"), rows(&t.a).chain(t.direction).chain(t.normal))?;
            if t.thetas.is_empty() || t.thetas.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(err(p("thetas"), "must be a nonempty list of values in [0, 1]"));
            }
            check_query(&p("k_schedule"), &query(matrix(&t.a), &t.k_schedule, &t.bc_modes, &t.optimizer, seeds))
        }
        TaskConfig::Lipschitz(t) => {
            if t.pairs == 0 {
                return Err(err(p("pairs"), "must be at least 1"));
            }
            if !(t.slack >= 0.0 && t.slack.is_finite()) {
                return Err(err(p("slack"), "must be a nonnegative number"));
            }
            cell_bound_constants(spec).map_err(|e| err(format!("tasks[{i}]"), e))?;
            check_query(&p("k_schedule"), &query(Mat2::identity(), &t.k_schedule, &t.bc_modes, &t.optimizer, seeds))
        }
        TaskConfig::Recovery(t) => {
            domain(&p("domain"), &t.domain)?;
            epsilons(&p("epsilons"), &t.epsilons)?;
            match (&t.corrector, &t.lambda) {
                (CorrectorSource::Zero, None) | (CorrectorSource::Minimized { .. }, None) => {
                    return Err(err(p("lambda"), "required for this corrector"));
                }
                (CorrectorSource::TwistedKagome { .. } | CorrectorSource::AlternatingRotation { .. }, Some(_)) => {
                    return Err(err(p("lambda"), "mechanism correctors fix their own gradient; remove lambda"));
                }
                _ => {}
            }
            if let Some(l) = &t.lambda {
                finite(&p("lambda"), rows(l))?;
            }
            match &t.corrector {
                CorrectorSource::TwistedKagome { theta } => {
                    crate::run::mechanism_state(spec, &MechanismChoice::TwistedKagome { theta: *theta })
                        .map_err(|e| err(p("corrector"), e))?;
                }
                CorrectorSource::AlternatingRotation { phi, theta } => {
                    crate::run::mechanism_state(spec, &MechanismChoice::AlternatingRotation { phi: *phi, theta: *theta })
                        .map_err(|e| err(p("corrector"), e))?;
                }
                CorrectorSource::Minimized { k, bc, optimizer } => {
                    check_query(&p("corrector"), &query(Mat2::identity(), &[*k], &[*bc], optimizer, seeds))?;
                }
                CorrectorSource::Zero => {}
            }
            Ok(())
        }
        TaskConfig::SoftMode(t) => {
            finite(&p("f"), rows(&t.f))?;
            domain(&p("domain"), &t.domain)?;
            epsilons(&p("epsilons"), &t.epsilons)?;
            t.optimizer.validate().map_err(|e| err(p("optimizer"), e))
        }
        TaskConfig::InterpolationReport(t) => {
            domain(&p("domain"), &t.domain)?;
            epsilons(&p("epsilons"), &t.epsilons)?;
            match &t.function {
                TestFunction::Affine { matrix: m, offset } => finite(&p("function"), rows(m).chain(*offset)),
                TestFunction::Sine { amplitude, frequency } => finite(&p("function"), [*amplitude, *frequency]),
            }
        }
    }
}

/// Twist angles of the Kagome mechanism must stay inside `(-pi/3, pi/3)`.
pub(crate) fn twist_in_range(theta: f64) -> bool {
    theta.abs() < FRAC_PI_3
}
