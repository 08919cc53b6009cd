//! Numerical instances of the `C^0` estimate chain on solved problems:
//! constants are fitted on a calibration instance and then checked on
//! held-out instances with the same `||A e^F||_{L^q}`.

mod integrals;
mod study;

use serde::Serialize;
use thiserror::Error;

pub use integrals::{
    cherrier_ratio, holder_excess, integrability_check, level_inequality, level_parts,
    log_exp_norm, log_normalized_exp_norm, shift_discrepancy, shifted_exp_integral, sobolev_ratio,
    stokes_chain, stokes_chain_residual, sublevel_measure, ChainTerms, StokesChain,
};
pub use study::{
    lq_class_norm, match_lq_class, sup_bound_study, write_cherrier_csv, write_moser_csv,
    write_scaling_csv, EstimateFlags, EstimateReport, FittedConstants, Forcing, InstanceEstimates,
    InstanceFlags, LevelCheck, ScalingRow, StabilityRow, StudySettings,
};

use crate::solver::SolveError;
use crate::torus::{ScalarField, TorusError};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("need q > 2n (q = {q}, n = {n})")]
    ExponentTooSmall { q: f64, n: usize },
    #[error("invalid study settings: {0}")]
    InvalidSettings(String),
    #[error("instance {index}: {source}")]
    Solve { index: usize, source: SolveError },
    #[error("could not match the L^q class: {0}")]
    ClassMatch(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

/// `q`, its conjugate `r`, the Sobolev gain `gamma = 2n / (2n - 1)`, the
/// starting exponent `p0` and `s0 = p0 r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub n: usize,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub p0: f64,
    pub s0: f64,
}

impl Exponents {
    pub fn new(n: usize, q: f64, p0: f64) -> Result<Self, EstimateError> {
        if !(q > 2.0 * n as f64) || !q.is_finite() {
            return Err(EstimateError::ExponentTooSmall { q, n });
        }
        if !(p0 > 0.0) {
            return Err(EstimateError::InvalidSettings("p0 must be positive".into()));
        }
        let r = q / (q - 1.0);
        let gamma = 2.0 * n as f64 / (2.0 * n as f64 - 1.0);
        Ok(Self {
            n,
            q,
            r,
            gamma,
            p0,
            s0: p0 * r,
        })
    }
}

/// One level of the induction: `eps_i`, the threshold `p_i` (zero on the
/// flat torus) and the constant `C_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelState {
    pub level: usize,
    pub eps: f64,
    pub p_threshold: f64,
    pub constant: f64,
}

/// `eps_{i+1} = min(1 / (C_i 2^{i+2}), eps_i, 1)`.
pub fn next_eps(state: &LevelState) -> f64 {
    let cap = if state.constant > 0.0 {
        1.0 / (state.constant * 2f64.powi(state.level as i32 + 2))
    } else {
        f64::INFINITY
    };
    cap.min(state.eps).min(1.0)
}

/// Fits `C_1, ..., C_n` level by level on one potential, with `eps_1 = 1`.
pub fn level_tracker(
    phi: &ScalarField,
    terms: &ChainTerms,
    exps: &Exponents,
    ps: &[f64],
    safety: f64,
) -> Vec<LevelState> {
    let mut out: Vec<LevelState> = Vec::with_capacity(exps.n);
    let mut eps = 1.0;
    for level in 1..=exps.n {
        let worst = ps
            .iter()
            .map(|&p| {
                let (lhs, norm, sum) = level_parts(phi, terms, p, exps.r, level);
                lhs / (norm + eps * sum)
            })
            .fold(0.0, f64::max);
        let state = LevelState {
            level,
            eps,
            p_threshold: 0.0,
            constant: safety * worst,
        };
        eps = next_eps(&state);
        out.push(state);
    }
    out
}

/// The Moser sequence `p_k = p0 (gamma / r)^k` and the norms
/// `||e^{-phi}||_{L^{p_k r}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoserRun {
    pub exponents: Vec<f64>,
    /// `log ||e^{-phi}||_{L^{p_k r}}`.
    pub log_norms: Vec<f64>,
    /// Same norms against the probability measure; nondecreasing.
    pub log_normalized_norms: Vec<f64>,
    /// `log(||.||_{p_{k+1} r} / ||.||_{p_k r}) - log(p_k C) / p_k`, which must be `<= 0`.
    pub step_excess: Vec<f64>,
    /// `log sup e^{-phi}`.
    pub log_sup: f64,
    /// `log(C_M ||e^{-phi}||_{L^{p0 r}})`.
    pub log_bound: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// `log prod_{k >= 0} (p_k c)^{1/p_k}`, summed until the terms vanish.
pub fn log_moser_constant(exps: &Exponents, recursion: f64) -> f64 {
    let ratio = exps.gamma / exps.r;
    let mut p = exps.p0;
    let mut total = 0.0;
    for _ in 0..100_000 {
        let term = (p * recursion).ln() / p;
        total += term;
        if term.abs() < 1e-18 * total.abs().max(1.0) {
            break;
        }
        p *= ratio;
    }
    total
}

/// Runs the sequence until `p_k > cap` or successive normalized norms agree
/// to `stabilization`, checking each recursion step against `recursion`.
pub fn moser_iterate(
    phi: &ScalarField,
    exps: &Exponents,
    recursion: f64,
    cap: f64,
    stabilization: f64,
) -> MoserRun {
    let ratio = exps.gamma / exps.r;
    let mut exponents = vec![exps.p0];
    let mut log_norms = vec![log_exp_norm(phi, exps.p0 * exps.r)];
    let vol_ln = phi.grid().volume().ln();
    let mut step_excess = Vec::new();
    loop {
        let p = *exponents.last().expect("nonempty");
        let next = p * ratio;
        if next > cap {
            break;
        }
        let norm = log_exp_norm(phi, next * exps.r);
        let prev = *log_norms.last().expect("nonempty");
        step_excess.push(norm - prev - (p * recursion).ln() / p);
        exponents.push(next);
        log_norms.push(norm);
        let a = prev - vol_ln / (p * exps.r);
        let b = norm - vol_ln / (next * exps.r);
        if (b - a).abs() <= stabilization {
            break;
        }
    }
    let log_normalized_norms: Vec<f64> = exponents
        .iter()
        .zip(&log_norms)
        .map(|(p, l)| l - vol_ln / (p * exps.r))
        .collect();
    let monotone = log_normalized_norms
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12);
    let log_sup = -phi.min();
    let log_bound = log_moser_constant(exps, recursion) + log_norms[0];
    let pass = step_excess.iter().all(|&e| e <= 1e-12) && log_sup <= log_bound + 1e-12;
    MoserRun {
        exponents,
        log_norms,
        log_normalized_norms,
        step_excess,
        log_sup,
        log_bound,
        monotone,
        pass,
    }
}
