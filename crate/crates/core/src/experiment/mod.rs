//! Experiment runner: configuration, suites per mode and artifact output.
//!
//! Artifacts written to the output directory, all byte-reproducible for a
//! fixed configuration:
//!
//! | mode          | files |
//! |---------------|-------|
//! | `identities`  | `identities.json` |
//! | `diagonalize` | `diagonalize.json` |
//! | `solve`       | `operators.json`, `solve.json`, `phi.qmaf`, `phi.csv` |
//! | `estimates`   | `estimates.json`, `cherrier.csv`, `moser.csv`, `scaling.csv` |
//! | `full`        | all of the above and `summary.json` |

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, DataSpec, ExperimentConfig, Mode};

use crate::estimates::{
    sup_bound_study, write_cherrier_csv, write_moser_csv, write_scaling_csv, EstimateError,
    Forcing, StudySettings,
};
use crate::solver::{solve, SolveConfig, SolveError, SolveReport};
use crate::suites::{
    coefficient_suite, diagonalization_suite, identity_suite, operator_suite, CoefficientSuite,
    DiagonalizationSuite, POSITIVITY_TOL,
};
use crate::torus::{io, ScalarField, SpectralGrid, TorusError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("internal check failed: {0}")]
    Internal(String),
}

impl RunError {
    /// 2 for configuration errors, 3 for solver failures, 4 for I/O; a
    /// failed internal check counts as a verification failure (1).
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 4,
            RunError::Internal(_) => 1,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<TorusError> for RunError {
    fn from(e: TorusError) -> Self {
        match e {
            TorusError::Io(e) => RunError::Io(e.to_string()),
            other => RunError::Config(ConfigError {
                line: 0,
                message: other.to_string(),
            }),
        }
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InvalidConfig(m) => RunError::Config(ConfigError {
                line: 0,
                message: m,
            }),
            other => RunError::Solver(other.to_string()),
        }
    }
}

impl From<EstimateError> for RunError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Solve { index, source } => {
                RunError::Solver(format!("instance {index}: {source}"))
            }
            EstimateError::Torus(t) => t.into(),
            other => RunError::Config(ConfigError {
                line: 0,
                message: other.to_string(),
            }),
        }
    }
}

/// Pass flag per suite that ran.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub identities: Option<bool>,
    pub diagonalize: Option<bool>,
    pub operators: Option<bool>,
    pub solve: Option<bool>,
    pub estimates: Option<bool>,
    pub pass: bool,
}

#[derive(Serialize)]
struct DiagonalizeArtifact {
    simultaneous: DiagonalizationSuite,
    coefficients: CoefficientSuite,
    pass: bool,
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    n: usize,
    active: Vec<usize>,
    points: usize,
    data: &'a DataSpec,
    report: &'a SolveReport,
    residual_tol: f64,
    positivity_tol: f64,
    pass: bool,
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| RunError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_with(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), TorusError>,
) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let mut w = BufWriter::new(fs::File::create(&path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn solve_config(cfg: &ExperimentConfig) -> SolveConfig {
    SolveConfig {
        continuity_steps: cfg.continuity_steps,
        newton_tol: cfg.newton_tol,
        max_newton_iterations: cfg.max_newton_iterations,
        damping: cfg.damping,
        linear_tol: cfg.linear_tol,
        gmres_restart: cfg.gmres_restart,
        max_linear_iterations: cfg.max_linear_iterations,
        ..SolveConfig::default()
    }
}

/// The grid and data; a field file fixes its own grid.
fn problem(cfg: &ExperimentConfig) -> Result<(SpectralGrid, Forcing), RunError> {
    match &cfg.data {
        DataSpec::Harmonics(h) => {
            let grid = SpectralGrid::new(cfg.n, &cfg.active, cfg.points)?;
            h.check(&grid)?;
            Ok((grid, Forcing::Harmonics(h.clone())))
        }
        DataSpec::Field(path) => {
            let f = io::load_field(path)?;
            if f.grid().n() != cfg.n {
                return Err(ConfigError {
                    line: 0,
                    message: format!(
                        "field file has n = {}, config has n = {}",
                        f.grid().n(),
                        cfg.n
                    ),
                }
                .into());
            }
            Ok((f.grid().clone(), Forcing::Field(f)))
        }
    }
}

fn run_identities(cfg: &ExperimentConfig, dir: &Path) -> Result<bool, RunError> {
    let report = identity_suite(cfg.n).map_err(|e| RunError::Internal(e.to_string()))?;
    write_json(dir, "identities.json", &report)?;
    eprintln!(
        "identities n={}: {}",
        cfg.n,
        if report.all_zero {
            "all residuals zero"
        } else {
            "NONZERO residual"
        }
    );
    Ok(report.all_zero)
}

fn run_diagonalize(cfg: &ExperimentConfig, dir: &Path) -> Result<bool, RunError> {
    let internal = |e: crate::simdiag::SimdiagError| RunError::Internal(e.to_string());
    let simultaneous =
        diagonalization_suite(cfg.n, cfg.diag_samples, cfg.seed).map_err(internal)?;
    let coefficients = coefficient_suite(cfg.n, cfg.coefficient_samples, cfg.seed.wrapping_add(1))
        .map_err(internal)?;
    let pass = simultaneous.pass && coefficients.pass;
    eprintln!(
        "diagonalize n={}: orthogonality {:.2e}, equivariance {:.2e}, coefficient violations {}",
        cfg.n,
        simultaneous.max_orthogonality,
        simultaneous.max_equivariance,
        coefficients.violations
    );
    write_json(
        dir,
        "diagonalize.json",
        &DiagonalizeArtifact {
            simultaneous,
            coefficients,
            pass,
        },
    )?;
    Ok(pass)
}

fn run_solve(cfg: &ExperimentConfig, dir: &Path) -> Result<(bool, bool), RunError> {
    let ops = operator_suite(cfg.operator_fields, cfg.seed.wrapping_add(2));
    write_json(dir, "operators.json", &ops)?;
    let (grid, forcing) = problem(cfg)?;
    let f: ScalarField = forcing.sample(&grid)?;
    let report = solve(&f, &solve_config(cfg))?;
    let pass = report.residual <= cfg.solve_tol && report.min_eigenvalue >= -POSITIVITY_TOL;
    eprintln!(
        "solve n={} N={}: residual {:.2e}, min eigenvalue {:.4}, sup|phi| {:.6}",
        grid.n(),
        grid.points(),
        report.residual,
        report.min_eigenvalue,
        -report.inf_phi
    );
    let artifact = SolveArtifact {
        n: grid.n(),
        active: grid.active().iter().map(|c| c + 1).collect(),
        points: grid.points(),
        data: &cfg.data,
        report: &report,
        residual_tol: cfg.solve_tol,
        positivity_tol: POSITIVITY_TOL,
        pass,
    };
    write_json(dir, "solve.json", &artifact)?;
    io::save_field(&dir.join("phi.qmaf"), &report.phi)?;
    write_with(dir, "phi.csv", |w| io::write_csv(w, &report.phi))?;
    Ok((ops.pass, pass))
}

fn run_estimates(cfg: &ExperimentConfig, dir: &Path) -> Result<bool, RunError> {
    let (grid, forcing) = problem(cfg)?;
    let mut settings = StudySettings::new(grid.n());
    settings.q = cfg.q;
    settings.p0 = cfg.p0;
    settings.sweep = cfg.sweep.clone();
    settings.safety = cfg.safety;
    settings.held_out = cfg.held_out;
    settings.seed = cfg.seed;
    settings.lq_target = cfg.lq_target;
    settings.scales = cfg.scales.clone();
    settings.refine = cfg.refine;
    settings.solve = solve_config(cfg);
    let report = sup_bound_study(&grid, &forcing, &settings)?;
    eprintln!(
        "estimates n={} N={}: {} instances, max sup|phi| {:.6}, assembled bound {:.4e}, {}",
        report.n,
        report.points,
        report.instances.len(),
        report.max_sup_norm,
        report.constants.bound,
        if report.pass {
            "all inequalities hold"
        } else {
            "FAILED"
        }
    );
    write_json(dir, "estimates.json", &report)?;
    write_with(dir, "cherrier.csv", |w| write_cherrier_csv(w, &report))?;
    write_with(dir, "moser.csv", |w| write_moser_csv(w, &report))?;
    write_with(dir, "scaling.csv", |w| write_scaling_csv(w, &report))?;
    Ok(report.pass)
}

/// Runs the configured mode, writing artifacts under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    let mut s = RunSummary {
        mode: cfg.mode.to_string(),
        ..RunSummary::default()
    };
    let all = cfg.mode == Mode::Full;
    if all || cfg.mode == Mode::Identities {
        s.identities = Some(run_identities(cfg, dir)?);
    }
    if all || cfg.mode == Mode::Diagonalize {
        s.diagonalize = Some(run_diagonalize(cfg, dir)?);
    }
    if all || cfg.mode == Mode::Solve {
        let (ops, solved) = run_solve(cfg, dir)?;
        s.operators = Some(ops);
        s.solve = Some(solved);
    }
    if all || cfg.mode == Mode::Estimates {
        s.estimates = Some(run_estimates(cfg, dir)?);
    }
    s.pass = [
        s.identities,
        s.diagonalize,
        s.operators,
        s.solve,
        s.estimates,
    ]
    .iter()
    .flatten()
    .all(|&p| p);
    if all {
        write_json(dir, "summary.json", &s)?;
    }
    Ok(s)
}
