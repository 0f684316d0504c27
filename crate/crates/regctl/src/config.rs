//! Run configuration: a TOML document with flat sections.
//!
//! ```toml
//! preset = "experiment2"    # experiment1 | experiment2 | custom
//!
//! [grid]       # nx, ny, x_min, x_max, y_min, y_max
//! [time]       # t_final, n_steps, krylov_tol
//! [model]      # kernel, kernel_value, d, a, c0, gamma, y0, capacity, K
//! [prey]       # d1, r, rho, tol   (logistic carrying capacity, full system)
//! [cost]       # theta, alpha, beta
//! [optimizer]  # maxiter, eps1, eps2, sigma, s0, eps_reg, snapshot_stride, phi0, phi0_file
//! [eigen]      # gammas, tol
//! [output]     # dir, format_version, eigen_report, gnuplot
//! [sweep]      # axis, values
//! ```
//!
//! Preset values are applied first and explicit keys override them. Unknown
//! keys are rejected so typos do not pass silently.

use std::fs;
use std::path::{Path, PathBuf};

use regctl_core::dynamics::TimeScheme;
use regctl_core::optimizer::{CarryingCapacity, OptimizerConfig};
use regctl_core::presets::{experiment1_operator, experiment2_operator, initial_phi_field};
use regctl_core::shape::CostWeights;
use regctl_core::{Bounds, Field, Grid, InteractionOperator};
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::ConfigError;
use crate::field_io::read_field;

/// Weight set swept in the reference runs.
pub const WEIGHT_SWEEP: [f64; 9] = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 50.0, 75.0, 100.0];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    prey: RawPrey,
    #[serde(default)]
    cost: RawCost,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    eigen: RawEigen,
    #[serde(default)]
    output: RawOutput,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<i64>,
    ny: Option<i64>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    y_min: Option<f64>,
    y_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_final: Option<f64>,
    n_steps: Option<i64>,
    krylov_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kernel: Option<String>,
    kernel_value: Option<f64>,
    d: Option<f64>,
    a: Option<f64>,
    c0: Option<f64>,
    gamma: Option<f64>,
    y0: Option<f64>,
    capacity: Option<String>,
    #[serde(rename = "K")]
    k: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrey {
    d1: Option<f64>,
    r: Option<f64>,
    rho: Option<f64>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    theta: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    maxiter: Option<i64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    sigma: Option<f64>,
    s0: Option<f64>,
    eps_reg: Option<f64>,
    snapshot_stride: Option<i64>,
    phi0: Option<String>,
    phi0_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEigen {
    gammas: Option<Vec<f64>>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format_version: Option<String>,
    eigen_report: Option<bool>,
    gnuplot: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Experiment1,
    Experiment2,
    Custom,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Experiment1 => "experiment1",
            Preset::Experiment2 => "experiment2",
            Preset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Experiment1,
    Experiment2,
    /// Nonlocal kernel equal to `value` everywhere.
    Uniform(f64),
    /// Local multiplication `B y = value y`.
    Local(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapacitySpec {
    Constant(f64),
    Logistic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phi0Spec {
    /// The bundled initial level set of both experiments.
    Experiment,
    /// `0.3 cos(pi x) cos(pi y) + 0.2 cos(2 pi x) - 0.1` on the unit square,
    /// with zero normal derivative on the boundary.
    Cosine,
    LeftHalf,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreyConfig {
    pub d1: f64,
    pub r: f64,
    pub rho: f64,
    pub tol: f64,
}

/// Fully validated settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    pub t_final: f64,
    pub n_steps: usize,
    pub krylov_tol: f64,
    pub kernel: KernelSpec,
    pub d: f64,
    pub a: f64,
    pub c0: f64,
    pub gamma: f64,
    pub y0: f64,
    pub capacity: CapacitySpec,
    pub prey: PreyConfig,
    pub weights: CostWeights,
    pub maxiter: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub sigma: f64,
    /// `None` means `dx^2`.
    pub s0: Option<f64>,
    pub eps_reg: Option<f64>,
    pub snapshot_stride: usize,
    pub phi0: Phi0Spec,
    pub eigen_gammas: Vec<f64>,
    pub eigen_tol: f64,
    pub output_dir: PathBuf,
    pub format_version: String,
    pub eigen_report: bool,
    pub gnuplot: bool,
    pub sweep: Option<Sweep>,
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be positive, got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be >= 0, got {v}")))
    }
}

fn count(key: &str, v: i64, min: i64) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v as usize)
    } else {
        Err(ConfigError::at(key, format!("must be at least {min}, got {v}")))
    }
}

/// Control rates for an eigenvalue sweep: nonnegative and ascending.
pub fn check_gammas(key: &str, gammas: &[f64]) -> Result<(), ConfigError> {
    for g in gammas {
        nonnegative(key, *g)?;
    }
    if gammas.windows(2).any(|w| w[1] < w[0]) {
        return Err(ConfigError::at(key, "must be sorted ascending"));
    }
    Ok(())
}

fn parse_kernel(name: &str, value: f64) -> Result<KernelSpec, ConfigError> {
    match name {
        "experiment1" => Ok(KernelSpec::Experiment1),
        "experiment2" => Ok(KernelSpec::Experiment2),
        "uniform" => Ok(KernelSpec::Uniform(nonnegative("model.kernel_value", value)?)),
        "local" => Ok(KernelSpec::Local(nonnegative("model.kernel_value", value)?)),
        other => Err(ConfigError::at(
            "model.kernel",
            format!("unknown kernel `{other}` (expected experiment1, experiment2, uniform or local)"),
        )),
    }
}

impl RawConfig {
    fn resolve(self) -> Result<RunConfig, ConfigError> {
        let preset = match self.preset.as_deref().unwrap_or("experiment1") {
            "experiment1" => Preset::Experiment1,
            "experiment2" => Preset::Experiment2,
            "custom" => Preset::Custom,
            other => {
                return Err(ConfigError::at(
                    "preset",
                    format!("unknown preset `{other}` (expected experiment1, experiment2 or custom)"),
                ))
            }
        };
        let kernel_name = match (&self.model.kernel, preset) {
            (Some(k), _) => k.clone(),
            (None, Preset::Experiment1) => "experiment1".into(),
            (None, Preset::Experiment2) => "experiment2".into(),
            (None, Preset::Custom) => {
                return Err(ConfigError::at("model.kernel", "required for the custom preset"));
            }
        };
        let kernel = parse_kernel(&kernel_name, self.model.kernel_value.unwrap_or(1.0))?;

        let g = self.grid;
        let nx = count("grid.nx", g.nx.unwrap_or(36), 3)?;
        let ny = count("grid.ny", g.ny.unwrap_or(36), 3)?;
        let bounds = Bounds::new(
            g.x_min.unwrap_or(0.0),
            g.x_max.unwrap_or(1.0),
            g.y_min.unwrap_or(0.0),
            g.y_max.unwrap_or(1.0),
        );
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(ConfigError::at("grid", "bounds must enclose a positive area"));
        }

        let capacity = match self.model.capacity.as_deref().unwrap_or("constant") {
            "constant" => CapacitySpec::Constant(nonnegative("model.K", self.model.k.unwrap_or(1.0))?),
            "logistic" => {
                if self.model.k.is_some() {
                    return Err(ConfigError::at(
                        "model.K",
                        "not used when model.capacity = \"logistic\"",
                    ));
                }
                CapacitySpec::Logistic
            }
            other => {
                return Err(ConfigError::at(
                    "model.capacity",
                    format!("unknown capacity `{other}` (expected constant or logistic)"),
                ))
            }
        };

        let c = self.cost;
        let theta = nonnegative("cost.theta", c.theta.unwrap_or(1.0))?;
        let alpha = nonnegative("cost.alpha", c.alpha.unwrap_or(0.0))?;
        let beta = nonnegative("cost.beta", c.beta.unwrap_or(0.0))?;
        let weights = CostWeights::new(theta, alpha, beta).map_err(|e| ConfigError::at("cost", e.to_string()))?;

        let o = self.optimizer;
        let phi0 = match (o.phi0.as_deref(), o.phi0_file) {
            (Some("file") | None, Some(path)) => Phi0Spec::File(path),
            (Some("file"), None) => {
                return Err(ConfigError::at(
                    "optimizer.phi0_file",
                    "required when optimizer.phi0 = \"file\"",
                ));
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::at(
                    "optimizer.phi0_file",
                    "only valid with optimizer.phi0 = \"file\"",
                ));
            }
            (None | Some("experiment"), None) => Phi0Spec::Experiment,
            (Some("cosine"), None) => Phi0Spec::Cosine,
            (Some("left_half"), None) => Phi0Spec::LeftHalf,
            (Some(other), None) => {
                return Err(ConfigError::at(
                    "optimizer.phi0",
                    format!("unknown initial level set `{other}` (expected experiment, cosine, left_half or file)"),
                ))
            }
        };

        let sweep = match self.sweep {
            None => None,
            Some(s) => {
                let axis = match s.axis.as_deref() {
                    Some("alpha") => SweepAxis::Alpha,
                    Some("beta") => SweepAxis::Beta,
                    Some(other) => {
                        return Err(ConfigError::at(
                            "sweep.axis",
                            format!("expected alpha or beta, got `{other}`"),
                        ))
                    }
                    None => return Err(ConfigError::at("sweep.axis", "required in the [sweep] section")),
                };
                let values = s.values.unwrap_or_else(|| WEIGHT_SWEEP.to_vec());
                if values.is_empty() {
                    return Err(ConfigError::at("sweep.values", "must not be empty"));
                }
                for v in &values {
                    nonnegative("sweep.values", *v)?;
                }
                Some(Sweep { axis, values })
            }
        };

        let gammas = self.eigen.gammas.unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0, 4.0]);
        check_gammas("eigen.gammas", &gammas)?;

        let format_version = self.output.format_version.unwrap_or_else(|| "1".into());
        if format_version.contains([',', '\n']) {
            return Err(ConfigError::at("output.format_version", "must not contain commas"));
        }

        Ok(RunConfig {
            preset,
            nx,
            ny,
            bounds,
            t_final: positive("time.t_final", self.time.t_final.unwrap_or(1.0))?,
            n_steps: count("time.n_steps", self.time.n_steps.unwrap_or(36), 1)?,
            krylov_tol: positive("time.krylov_tol", self.time.krylov_tol.unwrap_or(1e-3))?,
            kernel,
            d: positive("model.d", self.model.d.unwrap_or(1e-2))?,
            a: nonnegative("model.a", self.model.a.unwrap_or(1.0))?,
            c0: positive("model.c0", self.model.c0.unwrap_or(1.0))?,
            gamma: nonnegative("model.gamma", self.model.gamma.unwrap_or(1.0))?,
            y0: nonnegative("model.y0", self.model.y0.unwrap_or(1.0))?,
            capacity,
            prey: PreyConfig {
                d1: positive("prey.d1", self.prey.d1.unwrap_or(1e-2))?,
                r: positive("prey.r", self.prey.r.unwrap_or(1.0))?,
                rho: positive("prey.rho", self.prey.rho.unwrap_or(1.0))?,
                tol: positive("prey.tol", self.prey.tol.unwrap_or(1e-10))?,
            },
            weights,
            maxiter: count("optimizer.maxiter", o.maxiter.unwrap_or(50), 1)?,
            eps1: positive("optimizer.eps1", o.eps1.unwrap_or(1e-4))?,
            eps2: positive("optimizer.eps2", o.eps2.unwrap_or(1e-5))?,
            sigma: positive("optimizer.sigma", o.sigma.unwrap_or(1e-2))?,
            s0: o.s0.map(|v| positive("optimizer.s0", v)).transpose()?,
            eps_reg: o.eps_reg.map(|v| positive("optimizer.eps_reg", v)).transpose()?,
            snapshot_stride: count("optimizer.snapshot_stride", o.snapshot_stride.unwrap_or(1), 0)?,
            phi0,
            eigen_gammas: gammas,
            eigen_tol: positive("eigen.tol", self.eigen.tol.unwrap_or(1e-8))?,
            output_dir: self.output.dir.unwrap_or_else(|| PathBuf::from("regctl-out")),
            format_version,
            eigen_report: self.output.eigen_report.unwrap_or(false),
            gnuplot: self.output.gnuplot.unwrap_or(true),
            sweep,
        })
    }
}

/// Parse a `--set` value as a TOML scalar or array, falling back to a bare
/// string so `--set preset=custom` works without quotes.
fn override_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_owned())),
        Err(_) => Value::String(raw.to_owned()),
    }
}

/// Apply `section.key=value` (or top-level `key=value`) assignments.
pub fn apply_overrides(doc: &mut Table, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::general(format!("override `{item}` is not of the form key=value")))?;
        let path = path.trim();
        let value = override_value(raw.trim());
        match path.split_once('.') {
            None => {
                doc.insert(path.to_owned(), value);
            }
            Some((section, key)) => {
                if key.contains('.') || section.is_empty() || key.is_empty() {
                    return Err(ConfigError::at(path, "expected section.key"));
                }
                let entry = doc
                    .entry(section.to_owned())
                    .or_insert_with(|| Value::Table(Table::new()));
                match entry {
                    Value::Table(t) => {
                        t.insert(key.to_owned(), value);
                    }
                    _ => return Err(ConfigError::at(section, "is not a section")),
                }
            }
        }
    }
    Ok(())
}

fn describe(err: toml::de::Error) -> ConfigError {
    ConfigError::general(err.message().trim().to_owned())
}

pub fn parse_document(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(describe)
}

pub fn resolve(doc: Table) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = doc.try_into().map_err(describe)?;
    raw.resolve()
}

/// Parse a config string, then apply overrides.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc = parse_document(text)?;
    apply_overrides(&mut doc, overrides)?;
    resolve(doc)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    load(Some(path), &[])
}

/// Read `path` (or start from an empty document), apply the overrides and
/// validate. Relative `phi0_file` paths are taken relative to the config file.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = match path {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| ConfigError::general(format!("cannot read {}: {e}", p.display())))?
        }
        None => String::new(),
    };
    let mut cfg = parse_config_str(&text, overrides)?;
    if let (Some(p), Phi0Spec::File(f)) = (path, &mut cfg.phi0) {
        if f.is_relative() {
            if let Some(dir) = p.parent() {
                *f = dir.join(&*f);
            }
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.nx, self.ny, self.bounds).map_err(|e| ConfigError::at("grid", e.to_string()))
    }

    pub fn scheme(&self) -> Result<TimeScheme, ConfigError> {
        TimeScheme::new(self.t_final, self.n_steps)
            .map(|s| s.with_krylov_tol(self.krylov_tol))
            .map_err(|e| ConfigError::at("time", e.to_string()))
    }

    pub fn operator(&self, grid: &Grid) -> Result<InteractionOperator, ConfigError> {
        let built = match self.kernel {
            KernelSpec::Experiment1 => experiment1_operator(grid),
            KernelSpec::Experiment2 => experiment2_operator(grid),
            KernelSpec::Uniform(v) => InteractionOperator::nonlocal_from_fn(grid, |_, _| v),
            KernelSpec::Local(v) => InteractionOperator::local(Field::constant(grid, v)),
        };
        built.map_err(|e| ConfigError::at("model.kernel", e.to_string()))
    }

    pub fn phi0(&self, grid: &Grid) -> Result<Field, ConfigError> {
        match &self.phi0 {
            Phi0Spec::Experiment => Ok(initial_phi_field(grid)),
            Phi0Spec::Cosine => Ok(cosine_phi(grid)),
            Phi0Spec::LeftHalf => {
                // positive on the left half, zero level at x = 1/2
                let mid = 0.5 * (grid.bounds().x_min + grid.bounds().x_max);
                Ok(Field::from_fn(grid, |x, _| mid - x))
            }
            Phi0Spec::File(path) => {
                let (_, field) = read_field(path)
                    .map_err(|e| ConfigError::at("optimizer.phi0_file", format!("{}: {e}", path.display())))?;
                if field.grid() != grid {
                    return Err(ConfigError::at("optimizer.phi0_file", "grid does not match [grid]"));
                }
                Ok(field)
            }
        }
    }

    pub fn carrying_capacity(&self, grid: &Grid) -> CarryingCapacity {
        match self.capacity {
            CapacitySpec::Constant(k) => CarryingCapacity::Prescribed(Field::constant(grid, k)),
            CapacitySpec::Logistic => CarryingCapacity::Logistic {
                r: Field::constant(grid, self.prey.r),
                rho: Field::constant(grid, self.prey.rho),
                d1: self.prey.d1,
                tol: self.prey.tol,
            },
        }
    }

    pub fn s0(&self, grid: &Grid) -> f64 {
        self.s0.unwrap_or(grid.dx() * grid.dx())
    }

    pub fn optimizer_config<'a>(
        &self,
        grid: &Grid,
        b: &'a InteractionOperator,
    ) -> Result<OptimizerConfig<'a>, ConfigError> {
        Ok(OptimizerConfig {
            maxiter: self.maxiter,
            eps1: self.eps1,
            eps2: self.eps2,
            s0: self.s0(grid),
            sigma: self.sigma,
            eps_reg: self.eps_reg,
            weights: self.weights,
            scheme: self.scheme()?,
            d: self.d,
            a: Field::constant(grid, self.a),
            c0: self.c0,
            gamma: self.gamma,
            b,
            phi0: self.phi0(grid)?,
            y0: Field::constant(grid, self.y0),
            carrying_capacity: self.carrying_capacity(grid),
            snapshot_stride: self.snapshot_stride,
        })
    }

    /// `(alpha, beta)` pairs of the configured sweep, or the single pair.
    pub fn weight_pairs(&self) -> Vec<(f64, f64)> {
        match &self.sweep {
            None => vec![(self.weights.alpha, self.weights.beta)],
            Some(s) => s
                .values
                .iter()
                .map(|&v| match s.axis {
                    SweepAxis::Alpha => (v, self.weights.beta),
                    SweepAxis::Beta => (self.weights.alpha, v),
                })
                .collect(),
        }
    }
}

pub fn cosine_phi(grid: &Grid) -> Field {
    use std::f64::consts::PI;
    Field::from_fn(grid, |x, y| {
        0.3 * (PI * x).cos() * (PI * y).cos() + 0.2 * (2.0 * PI * x).cos() - 0.1
    })
}

/// Settings for the `simulate` verb when no config is given: a uniform
/// kernel, control on the left half, logistic prey with `r = rho = 1` and a
/// horizon of 5 at the default time step.
pub const DECAY_DEFAULTS: &str = r#"
preset = "custom"

[time]
t_final = 5.0
n_steps = 180
krylov_tol = 1e-10

[model]
kernel = "uniform"
capacity = "logistic"
"#;
