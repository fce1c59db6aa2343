//! Scenario files.
//!
//! A scenario is a TOML document. Every table except the top-level `name` and
//! `dim` is optional and falls back to the defaults shown here:
//!
//! ```toml
//! name = "small-gaussian"
//! dim = 3
//! mu = 0.0
//! seed = 1
//! analyses = ["classify", "evolve", "decay-fit"]
//!
//! [grid]
//! r_max = 12.0
//! m = 2048
//!
//! [initial]
//! family = "gaussian"        # gaussian | gaussian-poly | witness | file
//! amplitude = 1.0            # multiplies every family
//! coeffs = [1.0]             # gaussian-poly: P(r) = sum coeffs[k] r^k
//! decay = 0.25               # gaussian-poly: exp(-decay r^2)
//! epsilon = 0.5              # witness
//! variant = "continuous"     # witness: continuous | raw
//! path = "profile.txt"       # file, relative to the scenario file
//!
//! [evolution]                # see hardy_flow::EvolutionConfig
//! dt0 = 1e-3
//! s_max = 40.0
//!
//! [depth]
//! restarts = 8
//! max_iter = 3000
//! table_points = 41
//!
//! [hardy]
//! epsilons = [1.0, 0.3, 0.1, 0.03, 0.01]
//! variant = "continuous"
//! m = 8192                   # grid for the witness sweep, r_max from [grid]
//!
//! [lambda_bounds]
//! alpha_factor = 1.5         # level alpha = alpha_factor * d
//! samples = 1000
//!
//! [stationary]
//! tol_vdot = 1e-2
//! snapshot_every = 200
//!
//! [sweep]
//! lambdas = [0.1, 0.5, 1.0, 2.0]
//! threads = 4
//! ```
//!
//! A file with values for `family = "file"` holds one value per line, or
//! `r,value` pairs whose radii must match the grid nodes. Blank lines and
//! lines starting with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use hardy_flow::fields::{gaussian, gaussian_poly};
use hardy_flow::hardy::{witness_field, WitnessParams, WitnessVariant};
use hardy_flow::{EvolutionConfig, LabError, ModelParams, RadialField, RadialGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub depth: DepthSpec,
    #[serde(default)]
    pub hardy: HardySpec,
    #[serde(default)]
    pub lambda_bounds: LambdaSpec,
    #[serde(default)]
    pub stationary: StationarySpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Depth,
    Classify,
    Evolve,
    DecayFit,
    Hardy,
    LambdaBounds,
    Stationary,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub m: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_max: 12.0,
            m: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub family: String,
    pub amplitude: f64,
    pub coeffs: Vec<f64>,
    pub decay: f64,
    pub epsilon: f64,
    pub variant: WitnessVariant,
    pub path: Option<PathBuf>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            family: "gaussian".into(),
            amplitude: 1.0,
            coeffs: vec![1.0],
            decay: 0.25,
            epsilon: 0.5,
            variant: WitnessVariant::Continuous,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthSpec {
    pub restarts: usize,
    pub max_iter: usize,
    pub table_points: usize,
}

impl Default for DepthSpec {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iter: 3000,
            table_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardySpec {
    pub epsilons: Vec<f64>,
    pub variant: WitnessVariant,
    pub m: usize,
}

impl Default for HardySpec {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            variant: WitnessVariant::Continuous,
            m: 8192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSpec {
    pub alpha_factor: f64,
    pub samples: usize,
}

impl Default for LambdaSpec {
    fn default() -> Self {
        Self {
            alpha_factor: 1.5,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySpec {
    pub tol_vdot: f64,
    pub snapshot_every: usize,
}

impl Default for StationarySpec {
    fn default() -> Self {
        Self {
            tol_vdot: 1e-2,
            snapshot_every: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub lambdas: Vec<f64>,
    pub threads: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lambdas: Vec::new(),
            threads: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gaussian,
    GaussianPoly,
    Witness,
    File,
}

impl Family {
    fn parse(name: &str) -> CliResult<Self> {
        match name {
            "gaussian" => Ok(Family::Gaussian),
            "gaussian-poly" => Ok(Family::GaussianPoly),
            "witness" => Ok(Family::Witness),
            "file" => Ok(Family::File),
            other => Err(CliError::UnknownFamily(other.to_string())),
        }
    }
}

/// A parsed scenario together with the directory that relative paths in it
/// are resolved against.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

pub fn parse_scenario(text: &str, path: &Path) -> CliResult<Scenario> {
    toml::from_str(text).map_err(|e| CliError::ConfigParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> CliResult<LoadedScenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let scenario = parse_scenario(&text, path)?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let loaded = LoadedScenario { scenario, base_dir };
    loaded.validate()?;
    Ok(loaded)
}

fn invalid(e: LabError) -> CliError {
    CliError::Invalid(e.to_string())
}

impl LoadedScenario {
    pub fn in_memory(scenario: Scenario) -> Self {
        Self {
            scenario,
            base_dir: PathBuf::from("."),
        }
    }

    /// Checks everything that can be checked before any numerical work.
    pub fn validate(&self) -> CliResult<()> {
        let sc = &self.scenario;
        if sc.name.trim().is_empty() {
            return Err(CliError::Invalid("name must not be empty".into()));
        }
        self.params()?;
        let grid = self.grid()?;
        let v0 = self.initial_field(&grid)?;
        sc.evolution
            .validate(grid.l2_sq(&v0), v0.sup_norm())
            .map_err(invalid)?;
        if sc.depth.restarts == 0 || sc.depth.max_iter == 0 {
            return Err(CliError::Invalid(
                "depth.restarts and depth.max_iter must be positive".into(),
            ));
        }
        if sc.depth.table_points < 2 {
            return Err(CliError::Invalid("depth.table_points must be at least 2".into()));
        }
        let eps = &sc.hardy.epsilons;
        if eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Invalid(
                "hardy.epsilons must be positive and strictly decreasing".into(),
            ));
        }
        if sc.hardy.m < 4 {
            return Err(CliError::Invalid("hardy.m must be at least 4".into()));
        }
        if !(sc.lambda_bounds.alpha_factor > 1.0) || sc.lambda_bounds.samples == 0 {
            return Err(CliError::Invalid(
                "lambda_bounds.alpha_factor must exceed 1 and samples must be positive".into(),
            ));
        }
        if !(sc.stationary.tol_vdot > 0.0) || sc.stationary.snapshot_every == 0 {
            return Err(CliError::Invalid(
                "stationary.tol_vdot and stationary.snapshot_every must be positive".into(),
            ));
        }
        if sc.sweep.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(CliError::Invalid(
                "sweep.lambdas must be finite and nonnegative".into(),
            ));
        }
        if sc.sweep.threads == 0 {
            return Err(CliError::Invalid("sweep.threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        ModelParams::new(self.scenario.dim, self.scenario.mu).map_err(invalid)
    }

    pub fn grid(&self) -> CliResult<RadialGrid> {
        let g = self.scenario.grid;
        RadialGrid::new(self.scenario.dim, g.r_max, g.m).map_err(invalid)
    }

    pub fn hardy_grid(&self) -> CliResult<RadialGrid> {
        RadialGrid::new(self.scenario.dim, self.scenario.grid.r_max, self.scenario.hardy.m)
            .map_err(invalid)
    }

    /// The initial datum with its configured amplitude.
    pub fn initial_field(&self, grid: &RadialGrid) -> CliResult<RadialField> {
        self.initial_shape(grid)
            .map(|v| v.scaled(self.scenario.initial.amplitude))
    }

    /// The initial datum at unit amplitude, the base ray for sweeps.
    pub fn initial_shape(&self, grid: &RadialGrid) -> CliResult<RadialField> {
        let init = &self.scenario.initial;
        if !init.amplitude.is_finite() {
            return Err(CliError::Invalid("initial.amplitude must be finite".into()));
        }
        match Family::parse(&init.family)? {
            Family::Gaussian => gaussian(grid, 1.0).map_err(invalid),
            Family::GaussianPoly => {
                if init.coeffs.is_empty() || !(init.decay > 0.0) {
                    return Err(CliError::Invalid(
                        "gaussian-poly needs nonempty coeffs and decay > 0".into(),
                    ));
                }
                gaussian_poly(grid, &init.coeffs, init.decay).map_err(invalid)
            }
            Family::Witness => {
                let w = WitnessParams::new(grid.dim(), init.epsilon).map_err(invalid)?;
                witness_field(grid, &w, init.variant).map_err(invalid)
            }
            Family::File => {
                let rel = init.path.as_ref().ok_or_else(|| {
                    CliError::Invalid("family `file` needs initial.path".into())
                })?;
                let path = self.base_dir.join(rel);
                let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let values = parse_profile(&text, grid)
                    .map_err(|msg| CliError::Invalid(format!("{}: {msg}", path.display())))?;
                RadialField::new(grid, values).map_err(invalid)
            }
        }
    }
}

fn parse_profile(text: &str, grid: &RadialGrid) -> Result<Vec<f64>, String> {
    let nodes = grid.nodes();
    let tol = 1e-9 * grid.r_max();
    let mut values = Vec::with_capacity(nodes.len());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("line {}: {e}", lineno + 1))
        };
        let value = match line.split_once(',') {
            Some((r, v)) => {
                let r = num(r)?;
                let i = values.len();
                match nodes.get(i) {
                    Some(&x) if (x - r).abs() <= tol => {}
                    Some(&x) => {
                        return Err(format!("line {}: radius {r} does not match node {x}", lineno + 1))
                    }
                    None => return Err(format!("more than {} values", nodes.len())),
                }
                num(v)?
            }
            None => num(line)?,
        };
        values.push(value);
    }
    if values.len() != nodes.len() {
        return Err(format!(
            "{} values for a grid with {} cells",
            values.len(),
            nodes.len()
        ));
    }
    Ok(values)
}
