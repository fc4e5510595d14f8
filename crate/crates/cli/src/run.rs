//! Dispatch of a validated configuration to the solvers and verifiers.
//!
//! Every run writes its artifacts into `output.dir` and finishes with
//! `manifest.toml`, which echoes the effective configuration and lists each
//! output with its SHA-256 digest. The manifest is written on failure too.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tpflow_core::corpus;
use tpflow_core::embedding_verifier::{verify_corpus, write_embedding_csv};
use tpflow_core::galerkin_core::{galerkin_suite, write_galerkin_csv};
use tpflow_core::nonlinear_solver::{
    fixed_point_solve, nondimensionalize, write_trace_csv, BodyMotion, FixedPointConfig, FixedPointSolution,
};
use tpflow_core::oseen_spectral::estimates::{estimate_report, manufactured_case, write_estimate_csv, EstimateFamily};
use tpflow_core::oseen_spectral::frame::FrameConfig;
use tpflow_core::oseen_spectral::{
    oseen_tp_residual, rotating_residual, rotating_resolvent_residual, solve_oseen_tp, solve_rotating_oseen_tp,
    solve_rotating_resolvent, FlowParams, TPSolution,
};
use tpflow_core::spectral_field::{BoxGrid, Field, SupportGuard};
use tpflow_core::wiener_algebra::{wiener_suite, write_wiener_csv, FieldSeries, ScalarSeries, TorusSeries};
use tpflow_core::Error;

use crate::config::{ForcingSource, Requirement, RunConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SolveOseen,
    SolveRotating,
    SolveResolvent,
    SolveNonlinear,
    VerifyWiener,
    VerifyEmbedding,
    VerifyGalerkin,
    VerifyEstimates,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveOseen => "solve-oseen",
            Command::SolveRotating => "solve-rotating",
            Command::SolveResolvent => "solve-resolvent",
            Command::SolveNonlinear => "solve-nonlinear",
            Command::VerifyWiener => "verify-wiener",
            Command::VerifyEmbedding => "verify-embedding",
            Command::VerifyGalerkin => "verify-galerkin",
            Command::VerifyEstimates => "verify-estimates",
            Command::Sweep => "sweep",
        }
    }

    pub fn requirement(&self) -> Requirement {
        match self {
            Command::SolveOseen | Command::SolveRotating | Command::SolveResolvent | Command::VerifyEstimates => {
                Requirement::Linear
            }
            Command::SolveNonlinear => Requirement::Nonlinear,
            Command::VerifyEmbedding => Requirement::Embedding,
            Command::Sweep => Requirement::Sweep,
            Command::VerifyWiener | Command::VerifyGalerkin => Requirement::Grid,
        }
    }
}

/// One file listed in the manifest, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    threads: usize,
    wall_seconds: f64,
    status: String,
    exit_code: i32,
    outputs: &'a [OutputRecord],
    config: &'a RunConfig,
}

/// Result of a successful run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub outputs: Vec<OutputRecord>,
    /// `(quantity, value)` pairs also written to `summary.csv`.
    pub summary: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputRecord>,
    summary: Vec<(String, f64)>,
    warnings: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        let digest = Sha256::digest(bytes);
        self.files.retain(|f| f.path != name);
        self.files.push(OutputRecord {
            path: name.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn emit(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> tpflow_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn series(&mut self, name: &str, s: &FieldSeries) -> Result<(), CliError> {
        self.emit(name, |w| s.write_binary(w))
    }

    fn field(&mut self, name: &str, f: &Field) -> Result<(), CliError> {
        self.emit(name, |w| f.write_binary(w))
    }

    fn record(&mut self, name: &str, value: f64) {
        self.summary.push((name.to_string(), value));
    }

    fn write_summary(&mut self) -> Result<(), CliError> {
        if self.summary.is_empty() {
            return Ok(());
        }
        let mut text = String::from("quantity,value\n");
        for (k, v) in &self.summary {
            text.push_str(&format!("{k},{v:.12e}\n"));
        }
        self.write("summary.csv", text.as_bytes())
    }
}

/// Validates, runs and writes the manifest.
pub fn run(command: Command, config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate(command.requirement())?;
    let threads = config.thread_count()?;
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Output {
        path: dir.display().to_string(),
        source,
    })?;
    let start = Instant::now();
    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
        summary: Vec::new(),
        warnings: Vec::new(),
    };
    let result = dispatch(command, config, &mut out).and_then(|_| out.write_summary());
    let (status, exit_code) = match &result {
        Ok(()) => ("ok".to_string(), 0),
        Err(e) => (e.to_string(), e.exit_code()),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed: config.seed,
        threads,
        wall_seconds: start.elapsed().as_secs_f64(),
        status,
        exit_code,
        outputs: &out.files,
        config,
    };
    let text = toml::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })?;
    result.map(|_| RunReport {
        dir,
        outputs: out.files,
        summary: out.summary,
        warnings: out.warnings,
    })
}

fn dispatch(command: Command, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    match command {
        Command::SolveOseen => solve_linear(cfg, out, false),
        Command::SolveRotating => solve_linear(cfg, out, true),
        Command::SolveResolvent => solve_resolvent(cfg, out),
        Command::SolveNonlinear => solve_nonlinear(cfg, out),
        Command::VerifyWiener => verify_wiener(cfg, out),
        Command::VerifyEmbedding => verify_embedding(cfg, out),
        Command::VerifyGalerkin => verify_galerkin(cfg, out),
        Command::VerifyEstimates => verify_estimates(cfg, out),
        Command::Sweep => sweep(cfg, out),
    }
}

fn frame_config(cfg: &RunConfig) -> FrameConfig {
    FrameConfig {
        guard_width: cfg.nonlinear.guard_width,
        ..FrameConfig::default()
    }
}

fn read_forcing_file(path: &Path, grid: &BoxGrid) -> Result<FieldSeries, CliError> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open forcing {}: {e}", path.display())))?;
    let s = FieldSeries::read_binary(&mut std::io::BufReader::new(&mut file))
        .map_err(|e| CliError::Config(format!("forcing {}: {e}", path.display())))?;
    if !s.grid().same_as(grid) || s.ncomp() != 3 {
        return Err(CliError::Config(format!(
            "forcing {} does not hold a vector series on the configured grid",
            path.display()
        )));
    }
    Ok(s)
}

/// Seeded bumps rescaled to the configured `A^q` norm.
fn bump_forcing(cfg: &RunConfig, grid: BoxGrid, k_max: usize, amplitude: f64) -> Result<FieldSeries, CliError> {
    let f = corpus::bump_series(grid, k_max, cfg.forcing.modes, cfg.seed);
    let norm = f.a_norm(cfg.flow.q)?;
    Ok(if norm > 0.0 {
        f.scaled(Complex64::new(amplitude / norm, 0.0))
    } else {
        f
    })
}

/// Forcing and, for manufactured data, the exact velocity.
fn linear_forcing(
    cfg: &RunConfig,
    grid: BoxGrid,
    family: EstimateFamily,
    params: &FlowParams,
) -> Result<(FieldSeries, Option<FieldSeries>), CliError> {
    let k_max = match family {
        EstimateFamily::Resolvent { k } => cfg.grid.k_max.max(k.unsigned_abs() as usize),
        _ => cfg.grid.k_max,
    };
    Ok(match cfg.forcing.source {
        ForcingSource::Zero => (TorusSeries::zeros(k_max, &Field::zeros(grid, 3)), None),
        ForcingSource::Bumps => (bump_forcing(cfg, grid, k_max, cfg.forcing.amplitude)?, None),
        ForcingSource::File => (
            read_forcing_file(cfg.forcing.path.as_deref().unwrap(), &grid)?.truncate(k_max),
            None,
        ),
        ForcingSource::Manufactured => {
            let sigma = match family {
                EstimateFamily::SpaceTime => corpus::default_width(&grid),
                _ => corpus::rotating_width(&grid),
            };
            let (sol, f) = manufactured_case(family, grid, k_max, sigma, params, cfg.seed)?;
            (f, Some(sol.velocity))
        }
    })
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn solve_linear(cfg: &RunConfig, out: &mut Outputs, rotating: bool) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let params = cfg.flow_params()?;
    let q = params.q;
    let family = if rotating {
        EstimateFamily::Wiener
    } else {
        EstimateFamily::SpaceTime
    };
    let (forcing, exact) = linear_forcing(cfg, grid, family, &params)?;
    let (sol, residual) = if rotating {
        let sol = solve_rotating_oseen_tp(&forcing, &params, &frame_config(cfg))?;
        let r = rotating_residual(&sol, &forcing, params.lambda, params.omega, &SupportGuard::default())?;
        (sol, r)
    } else {
        let sol = solve_oseen_tp(&forcing, &params)?;
        let r = oseen_tp_residual(&sol, &forcing, params.lambda, params.omega)?;
        (sol, r)
    };
    out.series("velocity.tpos", &sol.velocity)?;
    out.series("pressure_gradient.tpos", &sol.pressure_gradient)?;
    let fnorm = forcing.a_norm(q)?;
    out.record("forcing_a_norm", fnorm);
    out.record("residual_relative", relative(residual.a_norm(q)?, fnorm));
    out.record("max_divergence", sol.max_divergence);
    if let Some(u) = exact {
        let k = u.k_max().max(sol.velocity.k_max());
        let err = sol.velocity.truncate(k).sub(&u.truncate(k))?.a_norm(q)?;
        out.record("recovery_error_relative", relative(err, u.a_norm(q)?));
    }
    let report = estimate_report(family, &sol, &forcing, &params)?;
    out.record("estimate_ratio", report.ratio);
    out.emit("estimates.csv", |w| write_estimate_csv(w, &[report]))
}

fn solve_resolvent(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let params = cfg.flow_params()?;
    let k = cfg.resolvent.k;
    let family = EstimateFamily::Resolvent { k };
    let (forcing, exact) = linear_forcing(cfg, grid, family, &params)?;
    let fk = forcing.coeff(k).expect("support covers k").clone();
    let sol = solve_rotating_resolvent(k, &fk, &params, &frame_config(cfg), cfg.resolvent.leak_tol)?;
    let r = rotating_resolvent_residual(k, &sol, &fk, &params, &SupportGuard::default())?;
    out.field("velocity.field", &sol.velocity)?;
    out.field("pressure_gradient.field", &sol.pressure_gradient)?;
    out.record("leak_ratio", sol.leak_ratio);
    out.record("residual_relative", relative(r.lq_norm(params.q), fk.lq_norm(params.q)));
    if let Some(u) = exact {
        let uk = u.coeff(k).expect("support covers k");
        out.record(
            "recovery_error_relative",
            relative(sol.velocity.sub(uk)?.lq_norm(params.q), uk.lq_norm(params.q)),
        );
    }
    Ok(())
}

fn motion(cfg: &RunConfig) -> Result<BodyMotion, CliError> {
    let alpha = ScalarSeries::from_real_trig(cfg.flow.lambda, &cfg.motion.alpha_cos, &cfg.motion.alpha_sin);
    Ok(match cfg.physical_params()? {
        Some(phys) => nondimensionalize(&phys, &alpha, cfg.flow.omega)?,
        None => BodyMotion::new(alpha, cfg.flow.omega)?,
    })
}

fn nonlinear_forcing(cfg: &RunConfig, grid: BoxGrid, amplitude: f64) -> Result<FieldSeries, CliError> {
    let k_max = cfg.grid.k_max;
    match cfg.forcing.source {
        ForcingSource::Zero => Ok(TorusSeries::zeros(k_max, &Field::zeros(grid, 3))),
        ForcingSource::Bumps => bump_forcing(cfg, grid, k_max, amplitude),
        ForcingSource::File => Ok(read_forcing_file(cfg.forcing.path.as_deref().unwrap(), &grid)?.truncate(k_max)),
        ForcingSource::Manufactured => Err(CliError::Config(
            "manufactured forcing is available for the linear solves only".into(),
        )),
    }
}

fn solve_nonlinear(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let motion = motion(cfg)?;
    let forcing = nonlinear_forcing(cfg, grid, cfg.forcing.amplitude)?;
    let fp = cfg.fixed_point();
    match fixed_point_solve(&forcing, &motion, &fp) {
        Ok(sol) => write_nonlinear(out, &sol, &motion, &fp),
        Err(Error::NonConvergence {
            iterations,
            reason,
            trace,
        }) => {
            out.emit("trace.csv", |w| write_trace_csv(w, &trace))?;
            Err(Error::NonConvergence {
                iterations,
                reason,
                trace,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn write_nonlinear(
    out: &mut Outputs,
    sol: &FixedPointSolution,
    motion: &BodyMotion,
    cfg: &FixedPointConfig,
) -> Result<(), CliError> {
    out.emit("trace.csv", |w| write_trace_csv(w, &sol.trace))?;
    out.series("velocity.tpos", &sol.velocity)?;
    out.series("pressure_gradient.tpos", &sol.pressure_gradient)?;
    out.series("lifting.tpos", &sol.lifting.velocity)?;
    out.record("lambda", motion.lambda());
    out.record("omega", motion.omega());
    out.record("epsilon", cfg.epsilon(motion.lambda()));
    out.record("iterations", sol.trace.len() as f64);
    let worst = sol.trace.iter().filter_map(|r| r.contraction_ratio).fold(0.0, f64::max);
    out.record("max_contraction_ratio", worst);
    out.record("residual_relative", sol.residual.relative);
    out.record("max_divergence", sol.max_divergence);
    out.record("lifting_max_divergence", sol.lifting.max_divergence);
    if let Some(w) = &sol.data_warning {
        out.warnings.push(w.clone());
    }
    out.record("data_warning", if sol.data_warning.is_some() { 1.0 } else { 0.0 });
    Ok(())
}

fn verify_wiener(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let v = &cfg.verify;
    let rows = wiener_suite(grid, cfg.grid.k_max, v.pairs, v.equality_cases, cfg.seed)?;
    let violations = rows
        .iter()
        .filter(|r| !r.kind.ends_with("equality") && !r.check.holds(1e-12))
        .count();
    let gap = rows
        .iter()
        .filter(|r| r.kind.ends_with("equality"))
        .map(|r| r.check.gap())
        .fold(0.0, f64::max);
    out.record("violations", violations as f64);
    out.record("max_equality_gap", gap);
    out.emit("wiener.csv", |w| write_wiener_csv(w, &rows))
}

fn verify_embedding(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let params = cfg.embedding_params()?;
    let fields = (0..cfg.verify.fields)
        .map(|i| corpus::embedding_field(grid, cfg.grid.k_max, cfg.verify.sigma, cfg.seed.wrapping_add(i as u64)));
    let rows = verify_corpus(fields, &params)?;
    let finite = rows.iter().all(|r| r.ratio.is_finite());
    out.record("all_finite", if finite { 1.0 } else { 0.0 });
    out.record("max_ratio", rows.iter().map(|r| r.ratio).fold(0.0, f64::max));
    out.emit("embedding.csv", |w| write_embedding_csv(w, &rows))
}

fn verify_galerkin(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let v = &cfg.verify;
    let grid =
        BoxGrid::new(v.galerkin_n, cfg.grid.length).map_err(|e| CliError::Config(format!("galerkin grid: {e}")))?;
    let rows = galerkin_suite(grid, v.systems, v.basis_size, v.r_in, v.r_out, cfg.seed)?;
    let max = |f: fn(&tpflow_core::galerkin_core::GalerkinRecord) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    out.record("max_skewness", max(|r| r.skewness));
    out.record("max_residual", max(|r| r.residual));
    out.record("max_energy_identity", max(|r| r.energy.energy_identity));
    out.record("max_sobolev_ratio", max(|r| r.energy.sobolev_ratio));
    out.emit("galerkin.csv", |w| write_galerkin_csv(w, &rows))
}

fn families(cfg: &RunConfig) -> [EstimateFamily; 3] {
    [
        EstimateFamily::Resolvent { k: cfg.resolvent.k },
        EstimateFamily::Wiener,
        EstimateFamily::SpaceTime,
    ]
}

fn family_ratios(cfg: &RunConfig, grid: BoxGrid, params: &FlowParams, seed: u64) -> Result<Vec<f64>, CliError> {
    let sigma = corpus::rotating_width(&grid);
    families(cfg)
        .into_iter()
        .map(|fam| {
            let (sol, f): (TPSolution, FieldSeries) =
                manufactured_case(fam, grid, cfg.grid.k_max, sigma, params, seed)?;
            Ok(estimate_report(fam, &sol, &f, params)?.ratio)
        })
        .collect()
}

fn verify_estimates(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let params = cfg.flow_params()?;
    let sigma = corpus::rotating_width(&grid);
    let mut reports = Vec::new();
    for case in 0..cfg.verify.estimate_cases {
        for fam in families(cfg) {
            let seed = cfg.seed.wrapping_add(case as u64);
            let (sol, f) = manufactured_case(fam, grid, cfg.grid.k_max, sigma, &params, seed)?;
            reports.push(estimate_report(fam, &sol, &f, &params)?);
        }
    }
    for fam in families(cfg) {
        let worst = reports
            .iter()
            .filter(|r| r.family == fam)
            .map(|r| r.ratio)
            .fold(0.0, f64::max);
        out.record(&format!("max_ratio_{}", fam.label()), worst);
    }
    out.emit("estimates.csv", |w| write_estimate_csv(w, &reports))
}

/// One sweep point: estimate ratios on manufactured data and, when enabled,
/// the fixed-point outcome for data of size `data_fraction·ε`.
fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.box_grid()?;
    let fp = cfg.fixed_point();
    let s = &cfg.sweep;
    let mut text = String::from(
        "lambda,omega,resolvent_ratio,wiener_ratio,space_time_ratio,converged,iterations,max_contraction_ratio,residual_relative\n",
    );
    let mut converged_points = 0;
    for &lambda in &s.lambdas {
        let omega = s.omega_factor * fp.kappa * lambda.powf(fp.rho_exp);
        let params = fp.flow_params(lambda, omega)?;
        let ratios = family_ratios(cfg, grid, &params, cfg.seed)?;
        let (converged, iters, worst, resid) = if s.nonlinear {
            let half = 0.5 * s.data_fraction * fp.epsilon(lambda);
            let alpha = ScalarSeries::from_real_trig(lambda, &[half], &[]);
            let motion = BodyMotion::new(alpha, omega)?;
            let forcing = nonlinear_forcing(cfg, grid, half)?;
            match fixed_point_solve(&forcing, &motion, &fp) {
                Ok(sol) => {
                    let worst = sol.trace.iter().filter_map(|r| r.contraction_ratio).fold(0.0, f64::max);
                    (1, sol.trace.len(), worst, sol.residual.relative)
                }
                Err(Error::NonConvergence { trace, .. }) => {
                    let worst = trace.iter().filter_map(|r| r.contraction_ratio).fold(0.0, f64::max);
                    (0, trace.len(), worst, f64::NAN)
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            (0, 0, f64::NAN, f64::NAN)
        };
        converged_points += converged;
        text.push_str(&format!(
            "{lambda},{omega:.12e},{:.12e},{:.12e},{:.12e},{converged},{iters},{worst:.6e},{resid:.6e}\n",
            ratios[0], ratios[1], ratios[2]
        ));
    }
    out.record("points", s.lambdas.len() as f64);
    out.record("converged_points", converged_points as f64);
    out.write("sweep.csv", text.as_bytes())
}
