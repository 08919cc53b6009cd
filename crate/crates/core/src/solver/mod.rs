//! Quaternionic Monge-Ampere on the discrete flat torus:
//! `Omega_phi^n = A e^F Omega^n`, `Omega_phi >= 0`, `max phi = 0`.
//!
//! The `n = 1` equation is the Poisson problem `laplacian(phi) / 4 = A e^F - 1`.
//! In general the solver follows `F_t = t F` for `t = 1/m, ..., 1` and runs
//! damped Newton on `G(phi) = density(phi) - A_t e^{F_t}` at each step, each
//! linear system solved by GMRES preconditioned with the inverse flat
//! Laplacian.

pub mod krylov;

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hypercomplex::standard_frame;
use crate::torus::{
    density_of, omega_phi, relative_eigenvalues, spectral_derivative, two_form_of_hessian,
    ScalarField,
};
use krylov::gmres;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub continuity_steps: usize,
    /// Target for `max |density - A e^F|`.
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    pub damping: f64,
    /// Relative tolerance of each GMRES solve.
    pub linear_tol: f64,
    pub gmres_restart: usize,
    pub max_linear_iterations: usize,
    /// Step halvings tried on residual growth or positivity loss.
    pub max_halvings: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            continuity_steps: 10,
            newton_tol: 1e-11,
            max_newton_iterations: 40,
            damping: 1.0,
            linear_tol: 1e-12,
            gmres_restart: 60,
            max_linear_iterations: 600,
            max_halvings: 10,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.to_string()));
        if self.continuity_steps == 0 {
            return bad("continuity_steps must be positive");
        }
        if !(self.newton_tol > 0.0 && self.linear_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if self.max_newton_iterations == 0
            || self.gmres_restart == 0
            || self.max_linear_iterations == 0
        {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub phi: ScalarField,
    /// Normalizing constant of the right-hand side.
    pub a: f64,
    /// `max |density(phi) - A e^F|`.
    pub residual: f64,
    /// Smallest relative eigenvalue of `Omega_phi` over the grid.
    pub min_eigenvalue: f64,
    /// Smallest pairing eigenvalue seen on accepted iterates.
    pub path_min_eigenvalue: f64,
    pub iterations: Vec<usize>,
    /// Newton residuals per continuity step.
    pub residual_history: Vec<Vec<f64>>,
    pub linear_iterations: usize,
    /// Largest `r_{k+1} / r_k^2` over the last Newton pair of each step with
    /// `r_{k+1}` above the rounding floor.
    pub quadratic_constant: Option<f64>,
    /// `integral density - integral A e^F`, relative to the volume.
    pub mass_defect: f64,
    pub sup_phi: f64,
    pub inf_phi: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("quaternionic dimension {0} not supported")]
    UnsupportedDimension(usize),
    #[error("active coordinates must meet both quaternionic blocks for n = 2")]
    DegenerateActiveSet,
    #[error("Newton iteration diverged at t = {t} (residual {residual:e})")]
    NewtonDivergence { t: f64, residual: f64 },
    #[error("q-positivity lost at t = {t} (smallest eigenvalue {min_eigenvalue:e})")]
    PositivityLoss { t: f64, min_eigenvalue: f64 },
    #[error("linear solve failed at t = {t} (relative residual {residual:e})")]
    LinearSolver { t: f64, residual: f64 },
}

/// Residual floor below which a Newton pair is not used for the quadratic
/// constant.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// `A = vol / integral e^F`, so that `integral (1 - A e^F) = 0`.
pub fn normalization_constant(f: &ScalarField) -> f64 {
    1.0 / f.map(f64::exp).mean()
}

/// Mean-zero `u` with `laplacian(u) / 4 = v` on the range.
fn quarter_laplacian_inverse(v: &ScalarField) -> ScalarField {
    ScalarField::solve_laplacian(&v.scale(4.0))
}

fn density(phi: &ScalarField) -> (ScalarField, Vec<DMatrix<Complex64>>) {
    let op = omega_phi(phi);
    let values: Vec<f64> = op.forms().par_iter().map(density_of).collect();
    let mats = op.forms().iter().map(|f| f.matrix().clone()).collect();
    (
        ScalarField::new(phi.grid().clone(), values).expect("finite density"),
        mats,
    )
}

/// Smallest pairing eigenvalue of `Omega_phi` over the grid.
fn min_pairing(phi: &ScalarField) -> f64 {
    omega_phi(phi).min_pairing_eigenvalue()
}

/// Coefficient matrices of `del del_J` of the unit real Hessians
/// `E_kl + E_lk` (or `E_kk`) on active pairs `k <= l`.
fn unit_hessian_forms(phi: &ScalarField) -> Vec<((usize, usize), DMatrix<Complex64>)> {
    let grid = phi.grid();
    let n = grid.n();
    let frame = standard_frame(n);
    let d = 2 * n;
    let active = grid.active().to_vec();
    let mut out = Vec::new();
    for (a, &k) in active.iter().enumerate() {
        for &l in &active[a..] {
            let mut h = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (p, wp) in frame.wirtinger(i) {
                        for (q, wq) in frame.wirtinger(j) {
                            if (p == k && q == l) || (p == l && q == k) {
                                s += wp * wq.conj();
                            }
                        }
                    }
                    h[(i, j)] = s;
                }
            }
            out.push(((k, l), two_form_of_hessian(&frame, &h).into_matrix()));
        }
    }
    out
}

/// Pointwise coefficients `c_kl` with `L psi = sum_{k<=l} c_kl d_k d_l psi`.
struct Linearization {
    pairs: Vec<(usize, usize)>,
    coeffs: Vec<Vec<f64>>,
}

impl Linearization {
    fn new(phi: &ScalarField, mats: &[DMatrix<Complex64>]) -> Option<Self> {
        let units = unit_hessian_forms(phi);
        let inverses: Option<Vec<DMatrix<Complex64>>> =
            mats.par_iter().map(|a| a.clone().try_inverse()).collect();
        let inverses = inverses?;
        let pairs = units.iter().map(|(p, _)| *p).collect();
        let coeffs = units
            .iter()
            .map(|(_, b)| {
                inverses
                    .par_iter()
                    .map(|inv| 0.5 * (inv * b).trace().re)
                    .collect()
            })
            .collect();
        Some(Self { pairs, coeffs })
    }

    fn apply(&self, psi: &ScalarField) -> Vec<f64> {
        let grid = psi.grid();
        let spec = psi.spectrum();
        let mut out = vec![0.0; grid.len()];
        for ((k, l), c) in self.pairs.iter().zip(&self.coeffs) {
            let d = spectral_derivative(grid, &spec, &[*k, *l]);
            for ((o, ci), di) in out.iter_mut().zip(c).zip(&d) {
                *o += ci * di.re;
            }
        }
        out
    }
}

/// Directional derivative of `log density` at `phi` along `psi`:
/// `tr(A_phi^{-1} B_psi) / 2` pointwise.
pub fn linearized_operator(
    phi: &ScalarField,
    psi: &ScalarField,
) -> Result<ScalarField, SolveError> {
    let min = min_pairing(phi);
    if min <= 0.0 {
        return Err(SolveError::PositivityLoss {
            t: f64::NAN,
            min_eigenvalue: min,
        });
    }
    let (_, mats) = density(phi);
    let lin = Linearization::new(phi, &mats).ok_or(SolveError::PositivityLoss {
        t: f64::NAN,
        min_eigenvalue: min,
    })?;
    Ok(ScalarField::new(psi.grid().clone(), lin.apply(psi)).expect("finite"))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    phi: ScalarField,
    f: &ScalarField,
    a: f64,
    path_min: f64,
    iterations: Vec<usize>,
    history: Vec<Vec<f64>>,
    linear_iterations: usize,
    start: Instant,
) -> SolveReport {
    let phi = phi.shift(-phi.max());
    let (rho, _) = density(&phi);
    let target = f.map(|v| a * v.exp());
    let residual = rho.sub(&target).sup_norm();
    let mass_defect = (rho.integrate() - target.integrate()) / phi.grid().volume();
    let eig = relative_eigenvalues(&omega_phi(&phi));
    let min_eigenvalue = eig.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let quadratic_constant = history
        .iter()
        .filter_map(|h| {
            let k = h.len();
            if k < 2 || h[k - 1] <= ROUNDING_FLOOR || h[k - 2] == 0.0 {
                return None;
            }
            Some(h[k - 1] / (h[k - 2] * h[k - 2]))
        })
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
    SolveReport {
        sup_phi: phi.max(),
        inf_phi: phi.min(),
        phi,
        a,
        residual,
        min_eigenvalue,
        path_min_eigenvalue: path_min,
        iterations,
        residual_history: history,
        linear_iterations,
        quadratic_constant,
        mass_defect,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Direct spectral solve of the `n = 1` equation.
pub fn solve_linear_n1(f: &ScalarField, cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let start = Instant::now();
    let n = f.grid().n();
    if n != 1 {
        return Err(SolveError::UnsupportedDimension(n));
    }
    let a = normalization_constant(f);
    let rhs = f.map(|v| a * v.exp() - 1.0);
    let phi = quarter_laplacian_inverse(&rhs);
    let min = min_pairing(&phi);
    if min < -1e-9 {
        return Err(SolveError::PositivityLoss {
            t: 1.0,
            min_eigenvalue: min,
        });
    }
    Ok(finish(phi, f, a, min, vec![1], vec![], 0, start))
}

/// The direct solve for `n = 1`, Newton otherwise.
pub fn solve(f: &ScalarField, cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    if f.grid().n() == 1 {
        solve_linear_n1(f, cfg)
    } else {
        solve_qma(f, cfg)
    }
}

fn check_active_set(phi_grid: &crate::torus::SpectralGrid) -> Result<(), SolveError> {
    match phi_grid.n() {
        1 => Ok(()),
        2 => {
            let blocks: Vec<usize> = phi_grid.active().iter().map(|k| k / 4).collect();
            if blocks.contains(&0) && blocks.contains(&1) {
                Ok(())
            } else {
                Err(SolveError::DegenerateActiveSet)
            }
        }
        n => Err(SolveError::UnsupportedDimension(n)),
    }
}

/// Continuity path plus damped Newton-GMRES.
pub fn solve_qma(f: &ScalarField, cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    check_active_set(f.grid())?;
    let start = Instant::now();
    let grid = f.grid().clone();
    let m = cfg.continuity_steps;
    let mut phi = ScalarField::zeros(&grid);
    let mut iterations = Vec::with_capacity(m);
    let mut history = Vec::with_capacity(m);
    let mut linear_iterations = 0;
    let mut path_min = f64::INFINITY;
    let mut a = 1.0;
    for step in 1..=m {
        let t = step as f64 / m as f64;
        let ft = f.scale(t);
        a = normalization_constant(&ft);
        let target = ft.map(|v| a * v.exp());
        let mut hist = Vec::new();
        let mut its = 0;
        loop {
            let (rho, mats) = density(&phi);
            let g = rho.sub(&target);
            let res = g.sup_norm();
            hist.push(res);
            // modes outside the Laplacian range cannot be corrected and
            // set a floor of the size of the unresolved content
            let floor = g.sub(&g.project_to_laplacian_range()).sup_norm();
            if res <= cfg.newton_tol + floor {
                break;
            }
            if its >= cfg.max_newton_iterations {
                return Err(SolveError::NewtonDivergence { t, residual: res });
            }
            let lin = Linearization::new(&phi, &mats).ok_or(SolveError::PositivityLoss {
                t,
                min_eigenvalue: 0.0,
            })?;
            // the kernel modes of the preconditioner are not controllable
            let rhs = g.project_to_laplacian_range().scale(-1.0);
            let jac = |x: &[f64]| {
                let psi = ScalarField::new(grid.clone(), x.to_vec()).expect("finite iterate");
                let l = lin.apply(&psi);
                let jl: Vec<f64> = l.iter().zip(rho.values()).map(|(li, r)| li * r).collect();
                ScalarField::new(grid.clone(), jl)
                    .expect("finite")
                    .project_to_laplacian_range()
                    .into_values()
            };
            let pre = |x: &[f64]| {
                let v = ScalarField::new(grid.clone(), x.to_vec()).expect("finite iterate");
                quarter_laplacian_inverse(&v.shift(-v.mean())).into_values()
            };
            let (delta, stats) = gmres(
                jac,
                pre,
                rhs.values(),
                cfg.linear_tol,
                cfg.gmres_restart,
                cfg.max_linear_iterations,
            );
            linear_iterations += stats.iterations;
            if !stats.converged && stats.relative_residual > 1e-6 {
                return Err(SolveError::LinearSolver {
                    t,
                    residual: stats.relative_residual,
                });
            }
            let delta = ScalarField::new(grid.clone(), delta).expect("finite step");
            let mut lambda = cfg.damping;
            let mut accepted = None;
            let mut last_min = f64::NAN;
            for _ in 0..=cfg.max_halvings {
                let trial = phi.add(&delta.scale(lambda));
                let min = min_pairing(&trial);
                last_min = min;
                if min > 0.0 {
                    let (rho_t, _) = density(&trial);
                    let res_t = rho_t.sub(&target).sup_norm();
                    if res_t < res {
                        accepted = Some((trial, min));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some((next, min)) = accepted else {
                if last_min <= 0.0 {
                    return Err(SolveError::PositivityLoss {
                        t,
                        min_eigenvalue: last_min,
                    });
                }
                return Err(SolveError::NewtonDivergence { t, residual: res });
            };
            path_min = path_min.min(min);
            phi = next;
            its += 1;
        }
        iterations.push(its);
        history.push(hist);
    }
    if path_min == f64::INFINITY {
        path_min = min_pairing(&phi);
    }
    Ok(finish(
        phi,
        f,
        a,
        path_min,
        iterations,
        history,
        linear_iterations,
        start,
    ))
}
