use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::exterior::{ratio_to_omega_n, standard_omega_form, Form};
use crate::torus::{del_and_del_j_components, gradient_energy, ma_density, omega_phi, ScalarField};

/// `integral g e^{-p (phi - inf phi)}`; multiply by `e^{-p inf phi}` for the
/// unshifted value.
pub fn shifted_exp_integral(phi: &ScalarField, p: f64, weight: Option<&[f64]>) -> f64 {
    let m = phi.min();
    let vals = phi.values();
    let sum: f64 = match weight {
        Some(w) => vals
            .iter()
            .zip(w)
            .map(|(&v, &g)| g * (-p * (v - m)).exp())
            .sum(),
        None => vals.iter().map(|&v| (-p * (v - m)).exp()).sum(),
    };
    sum / vals.len() as f64 * phi.grid().volume()
}

/// `log ||e^{-phi}||_{L^p}`.
pub fn log_exp_norm(phi: &ScalarField, p: f64) -> f64 {
    -phi.min() + shifted_exp_integral(phi, p, None).ln() / p
}

/// `log` of the same norm against the probability measure `mu / vol`.
pub fn log_normalized_exp_norm(phi: &ScalarField, p: f64) -> f64 {
    log_exp_norm(phi, p) - phi.grid().volume().ln() / p
}

/// Pointwise ratios to `Omega^n` that enter the integration-by-parts chain:
/// `del phi ^ del_J phi ^ alpha` with `alpha = sum_k Omega_phi^k ^ Omega^{n-1-k}`,
/// and the mixed powers `Omega_phi^k ^ Omega^{n-k}` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct ChainTerms {
    pub gradient_pair: Vec<f64>,
    pub mixed: Vec<Vec<f64>>,
    pub density: Vec<f64>,
}

impl ChainTerms {
    pub fn new(phi: &ScalarField) -> Self {
        let n = phi.grid().n();
        let forms = omega_phi(phi);
        let (dphi, djphi) = del_and_del_j_components(phi);
        let omega: Form<Complex64> = standard_omega_form(n);
        let omega_powers: Vec<Form<Complex64>> =
            (0..=n).map(|k| omega.power(k).expect("degree")).collect();
        let covector = |c: &[Complex64]| {
            c.iter()
                .enumerate()
                .fold(Form::zero(n, 1, 0), |acc, (i, &v)| {
                    acc.add(&Form::dz(n, i).scale(&v))
                })
        };
        let per_point: Vec<(f64, Vec<f64>)> = (0..phi.grid().len())
            .into_par_iter()
            .map(|x| {
                let op = forms.at(x).to_form();
                let op_powers: Vec<Form<Complex64>> =
                    (0..=n).map(|k| op.power(k).expect("degree")).collect();
                let mut alpha = Form::zero(n, 2 * n - 2, 0);
                for k in 0..n {
                    alpha = alpha.add(
                        &op_powers[k]
                            .wedge(&omega_powers[n - 1 - k])
                            .expect("degree"),
                    );
                }
                let pair = covector(&dphi[x])
                    .wedge(&covector(&djphi[x]))
                    .and_then(|f| f.wedge(&alpha))
                    .expect("degree");
                let mixed = (0..=n)
                    .map(|k| {
                        ratio_to_omega_n(&op_powers[k].wedge(&omega_powers[n - k]).expect("degree"))
                            .re
                    })
                    .collect();
                (ratio_to_omega_n(&pair).re, mixed)
            })
            .collect();
        let (gradient_pair, mixed) = per_point.into_iter().unzip();
        Self {
            gradient_pair,
            mixed,
            density: ma_density(phi).into_values(),
        }
    }

    /// The `k`-th mixed power at every sample.
    pub fn mixed_power(&self, k: usize) -> Vec<f64> {
        self.mixed.iter().map(|m| m[k]).collect()
    }
}

/// Both sides of `integral e^{-p phi}(Omega_phi^n - Omega^n) ^ conj(Omega)^n
/// = p integral e^{-p phi} del phi ^ del_J phi ^ alpha ^ conj(Omega)^n`,
/// scaled by `e^{p inf phi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesChain {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative: f64,
}

pub fn stokes_chain(phi: &ScalarField, terms: &ChainTerms, p: f64) -> StokesChain {
    assert!(p > 0.0, "need p > 0");
    let excess: Vec<f64> = terms.density.iter().map(|d| d - 1.0).collect();
    let lhs = shifted_exp_integral(phi, p, Some(&excess));
    let rhs = p * shifted_exp_integral(phi, p, Some(&terms.gradient_pair));
    let scale = lhs.abs().max(rhs.abs());
    let relative = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    StokesChain {
        p,
        lhs,
        rhs,
        relative,
    }
}

/// Relative difference of the two sides of the integration-by-parts chain.
pub fn stokes_chain_residual(phi: &ScalarField, p: f64) -> f64 {
    stokes_chain(phi, &ChainTerms::new(phi), p).relative
}

/// `integral |del e^{-p phi / 2}|^2 / (p ||e^{-phi}||^p_{L^{pr}})`,
/// `r = q / (q - 1)`.
pub fn cherrier_ratio(phi: &ScalarField, p: f64, q: f64) -> f64 {
    assert!(p > 0.0 && q > 1.0, "need p > 0 and q > 1");
    let r = q / (q - 1.0);
    let m = phi.min();
    let u = phi.map(|v| (-p * (v - m) / 2.0).exp());
    let energy = gradient_energy(&u);
    energy / (p * shifted_exp_integral(phi, p * r, None).powf(1.0 / r))
}

/// `||u||^2_{L^{2 gamma}} / (||grad u||^2_{L^2} + ||u||^2_{L^2})` for
/// `u = e^{-p phi / 2}`; the Euclidean gradient energy is four times the
/// form energy.
pub fn sobolev_ratio(phi: &ScalarField, p: f64, gamma: f64) -> f64 {
    let m = phi.min();
    let u = phi.map(|v| (-p * (v - m) / 2.0).exp());
    let top = shifted_exp_integral(phi, p * gamma, None).powf(1.0 / gamma);
    let bottom = 4.0 * gradient_energy(&u) + shifted_exp_integral(phi, p, None);
    top / bottom
}

/// One level of the inductive bound, both sides scaled by `e^{p inf phi}`:
/// `lhs = (p / 2^i) integral e^{-p phi} del phi ^ del_J phi ^ alpha`,
/// `rhs = c ||e^{-phi}||^p_{L^{pr}} + eps c sum_{k=1}^{n-i} integral e^{-p phi} Omega_phi^k ^ Omega^{n-k}`.
pub fn level_inequality(
    phi: &ScalarField,
    terms: &ChainTerms,
    p: f64,
    r: f64,
    eps: f64,
    level: usize,
    c: f64,
) -> (f64, f64) {
    let (lhs, norm, sum) = level_parts(phi, terms, p, r, level);
    (lhs, c * norm + eps * c * sum)
}

/// `(lhs, ||e^{-phi}||^p_{L^{pr}}, mixed sum)`, all scaled by `e^{p inf phi}`.
pub fn level_parts(
    phi: &ScalarField,
    terms: &ChainTerms,
    p: f64,
    r: f64,
    level: usize,
) -> (f64, f64, f64) {
    let n = phi.grid().n();
    assert!((1..=n).contains(&level), "level out of range");
    let lhs =
        p / 2f64.powi(level as i32) * shifted_exp_integral(phi, p, Some(&terms.gradient_pair));
    let norm = shifted_exp_integral(phi, p * r, None).powf(1.0 / r);
    let sum = (1..=n - level)
        .map(|k| shifted_exp_integral(phi, p, Some(&terms.mixed_power(k))))
        .sum();
    (lhs, norm, sum)
}

/// Both sides of `e^{-s0 inf phi} <= e^C integral e^{-s0 phi}`, scaled by
/// `e^{s0 inf phi}`.
pub fn integrability_check(phi: &ScalarField, s0: f64, c: f64) -> (f64, f64) {
    assert!(s0 > 0.0, "need s0 > 0");
    (1.0, c.exp() * shifted_exp_integral(phi, s0, None))
}

/// Volume of `{phi <= inf phi + c1}`.
pub fn sublevel_measure(phi: &ScalarField, c1: f64) -> f64 {
    let m = phi.min();
    let inside = phi.values().iter().filter(|&&v| v <= m + c1).count();
    inside as f64 / phi.grid().len() as f64 * phi.grid().volume()
}

/// Largest relative excess of `||e^{-phi}||_{L^p}` over
/// `||e^{-phi}||_{L^{pr}} vol^{1/p - 1/(pr)}` over the given exponents.
pub fn holder_excess(phi: &ScalarField, ps: &[f64], r: f64) -> f64 {
    let vol = phi.grid().volume();
    ps.iter()
        .map(|&p| {
            let lhs = log_exp_norm(phi, p);
            let rhs = log_exp_norm(phi, p * r) + (1.0 / p - 1.0 / (p * r)) * vol.ln();
            (lhs - rhs).exp_m1().max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Largest relative gap between shifted and direct evaluation of
/// `integral e^{-p phi}`.
pub fn shift_discrepancy(phi: &ScalarField, ps: &[f64]) -> f64 {
    let m = phi.min();
    ps.iter()
        .map(|&p| {
            let direct = phi.map(|v| (-p * v).exp()).integrate();
            let shifted = (-p * m).exp() * shifted_exp_integral(phi, p, None);
            (direct - shifted).abs() / direct.abs()
        })
        .fold(0.0, f64::max)
}
