//! Run configuration: a TOML file, `--set section.key=value` overrides and
//! per-command validation.
//!
//! Precedence is flag over file over built-in default. The effective
//! configuration re-serializes to TOML that parses back to the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tpflow_core::embedding_verifier::EmbeddingParams;
use tpflow_core::nonlinear_solver::{FixedPointConfig, PhysicalParams};
use tpflow_core::oseen_spectral::frame::FrameConfig;
use tpflow_core::oseen_spectral::FlowParams;
use tpflow_core::spectral_field::BoxGrid;

use crate::error::CliError;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "TPFLOW_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; falls back to `TPFLOW_THREADS`, then to 1.
    pub threads: Option<usize>,
    pub grid: GridConfig,
    pub flow: FlowConfig,
    pub forcing: ForcingConfig,
    pub resolvent: ResolventConfig,
    pub motion: MotionConfig,
    pub physical: Option<PhysicalConfig>,
    pub nonlinear: NonlinearConfig,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: None,
            grid: GridConfig::default(),
            flow: FlowConfig::default(),
            forcing: ForcingConfig::default(),
            resolvent: ResolventConfig::default(),
            motion: MotionConfig::default(),
            physical: None,
            nonlinear: NonlinearConfig::default(),
            verify: VerifyConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
    pub k_max: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 32,
            length: 16.0,
            k_max: 8,
        }
    }
}

/// Dimensionless flow parameters. `bound` defaults to `θω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub lambda: f64,
    pub omega: f64,
    pub theta: f64,
    pub bound: Option<f64>,
    pub q: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            omega: 0.5,
            theta: 1.0,
            bound: None,
            q: 1.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingSource {
    Zero,
    /// Seeded safe-ball Gaussian bumps.
    Bumps,
    /// Forcing of a seeded exact solution; the solve reports the recovery error.
    Manufactured,
    /// A series binary at `forcing.path`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub source: ForcingSource,
    pub path: Option<PathBuf>,
    /// `A^q` norm the bump forcing is scaled to.
    pub amplitude: f64,
    /// Highest active time mode of generated forcing.
    pub modes: usize,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self {
            source: ForcingSource::Bumps,
            path: None,
            amplitude: 1.0,
            modes: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    pub k: i64,
    pub leak_tol: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self { k: 1, leak_tol: 1e-8 }
    }
}

/// Translational speed `α(t) = λ + Σ_j a_j cos(jt) + b_j sin(jt)`; the
/// mean is `flow.lambda` and the angular speed `flow.omega`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub alpha_cos: Vec<f64>,
    pub alpha_sin: Vec<f64>,
}

/// When present, `flow.lambda`, `flow.omega` and the motion coefficients
/// are dimensional and are converted before the nonlinear solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub density: f64,
    pub viscosity: f64,
    pub diameter: f64,
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    pub rho_exp: f64,
    pub kappa: f64,
    pub lambda0: f64,
    /// Data smallness level; `λ²` when absent.
    pub epsilon: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub cutoff_radius: f64,
    pub guard_width: usize,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            rho_exp: d.rho_exp,
            kappa: d.kappa,
            lambda0: d.lambda0,
            epsilon: d.epsilon,
            tol: d.tol,
            max_iter: d.max_iter,
            cutoff_radius: d.cutoff_radius,
            guard_width: d.frame.guard_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub pairs: usize,
    pub equality_cases: usize,
    pub fields: usize,
    /// Gaussian width of the embedding corpus.
    pub sigma: f64,
    pub embedding_alpha: Vec<f64>,
    pub embedding_beta: Vec<f64>,
    pub galerkin_n: usize,
    pub basis_size: usize,
    pub systems: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub estimate_cases: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pairs: 100,
            equality_cases: 10,
            fields: 50,
            sigma: 1.2,
            embedding_alpha: vec![0.5, 1.0, 1.5],
            embedding_beta: vec![0.25, 0.5],
            galerkin_n: 64,
            basis_size: 8,
            systems: 20,
            r_in: 0.3,
            r_out: 7.2,
            estimate_cases: 3,
        }
    }
}

/// Sweep over `λ` with `ω = omega_factor·κλ^ρ`; the data of each point has
/// size `data_fraction·ε` split between motion and forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub omega_factor: f64,
    pub data_fraction: f64,
    pub nonlinear: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.02, 0.04, 0.08],
            omega_factor: 0.5,
            data_fraction: 0.8,
            nonlinear: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("tpflow-out"),
        }
    }
}

/// What a run has to validate before dispatch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    /// Grid only.
    Grid,
    /// Grid and the linear flow window.
    Linear,
    /// Grid and the nonlinear existence window.
    Nonlinear,
    /// Grid and the embedding exponents.
    Embedding,
    /// Grid and the sweep window.
    Sweep,
}

impl RunConfig {
    /// Reads a TOML file and applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_table(value)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn box_grid(&self) -> Result<BoxGrid, CliError> {
        BoxGrid::new(self.grid.n, self.grid.length).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn flow_params(&self) -> Result<FlowParams, CliError> {
        let f = &self.flow;
        let bound = f.bound.unwrap_or(f.theta * f.omega);
        FlowParams::new(f.lambda, f.omega, f.theta, bound, f.q).map_err(config_error)
    }

    pub fn fixed_point(&self) -> FixedPointConfig {
        let n = &self.nonlinear;
        FixedPointConfig {
            q: self.flow.q,
            rho_exp: n.rho_exp,
            theta: self.flow.theta,
            kappa: n.kappa,
            lambda0: n.lambda0,
            epsilon: n.epsilon,
            tol: n.tol,
            max_iter: n.max_iter,
            cutoff_radius: n.cutoff_radius,
            frame: FrameConfig {
                guard_width: n.guard_width,
                ..FrameConfig::default()
            },
        }
    }

    pub fn physical_params(&self) -> Result<Option<PhysicalParams>, CliError> {
        self.physical
            .as_ref()
            .map(|p| PhysicalParams::new(p.density, p.viscosity, p.diameter, p.period).map_err(config_error))
            .transpose()
    }

    pub fn embedding_params(&self) -> Result<Vec<EmbeddingParams>, CliError> {
        let mut out = Vec::new();
        for &a in &self.verify.embedding_alpha {
            for &b in &self.verify.embedding_beta {
                let p = EmbeddingParams::new(a, b, self.flow.q, self.flow.omega)
                    .map_err(|e| CliError::Config(format!("embedding (alpha={a}, beta={b}): {e}")))?;
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Worker count: config, then environment, then 1.
    pub fn thread_count(&self) -> Result<usize, CliError> {
        let n = match self.threads {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}")))?,
                Err(_) => 1,
            },
        };
        if n == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(n)
    }

    /// Checks everything a command needs before any work starts.
    pub fn validate(&self, need: Requirement) -> Result<(), CliError> {
        self.box_grid()?;
        self.thread_count()?;
        match need {
            Requirement::Grid => {}
            Requirement::Linear => {
                self.flow_params()?;
            }
            Requirement::Nonlinear => {
                let cfg = self.fixed_point();
                cfg.validate().map_err(config_error)?;
                if self.physical.is_none() {
                    cfg.check_window(self.flow.lambda, self.flow.omega)
                        .map_err(config_error)?;
                }
                self.physical_params()?;
            }
            Requirement::Embedding => {
                self.embedding_params()?;
            }
            Requirement::Sweep => {
                let cfg = self.fixed_point();
                cfg.validate().map_err(config_error)?;
                let s = &self.sweep;
                if s.lambdas.is_empty() {
                    return Err(CliError::Config("sweep.lambdas is empty".into()));
                }
                if !(s.omega_factor > 0.0 && s.omega_factor < 1.0) {
                    return Err(CliError::Config("sweep.omega_factor must lie in (0, 1)".into()));
                }
                for &l in &s.lambdas {
                    let omega = s.omega_factor * cfg.kappa * l.powf(cfg.rho_exp);
                    cfg.check_window(l, omega)
                        .map_err(|e| CliError::Config(format!("sweep point lambda = {l}: {e}")))?;
                }
            }
        }
        if self.forcing.source == ForcingSource::File {
            match &self.forcing.path {
                None => return Err(CliError::Config("forcing.source = \"file\" needs forcing.path".into())),
                Some(p) if !p.is_file() => {
                    return Err(CliError::Config(format!(
                        "forcing file {} is not readable",
                        p.display()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

fn config_error(e: tpflow_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Applies `section.key=value`. The value is parsed as a TOML literal and
/// taken as a bare string when that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key {path:?} is malformed")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {path:?}: {k} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
