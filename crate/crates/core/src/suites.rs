//! Randomized verification suites with fixed tolerances, shared by the
//! command-line front end and the acceptance tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exterior::{verify_wedge_identities, ExteriorError, WedgeIdentityReport};
use crate::hypercomplex::standard_frame;
use crate::simdiag::sampling::{random_q_positive, random_q_real, random_vector};
use crate::simdiag::{
    build_omega_tilde, coefficient_bound, conj_equivariance_residual, simultaneous_diagonalize,
    PointwiseCoefficients, SimdiagError,
};
use crate::torus::{
    band_limited, del_del_j, gradient_energy, gradient_energy_coordinate, ma_density_eigen,
    ma_density_exterior, FormField, SpectralGrid,
};

pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const EQUIVARIANCE_TOL: f64 = 1e-11;
pub const EIGENVALUE_TOL: f64 = 1e-9;
pub const ANTICOMMUTATION_TOL: f64 = 1e-11;
pub const Q_REAL_TOL: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-9;
pub const DENSITY_PATH_TOL: f64 = 1e-10;
pub const DENSITY_RESIDUAL_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const EPSILONS: [f64; 3] = [0.01, 1.0, 100.0];

/// Exact wedge identities; zero residual polynomials required.
pub fn identity_suite(n: usize) -> Result<WedgeIdentityReport, ExteriorError> {
    verify_wedge_identities(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalizationSuite {
    pub n: usize,
    pub samples: usize,
    pub max_orthogonality: f64,
    pub max_equivariance: f64,
    pub max_eigen_residual: f64,
    /// Over the instances with a q-positive second form.
    pub max_imaginary: f64,
    pub min_real: f64,
    pub failures: usize,
    pub pass: bool,
}

/// Per sample: a strictly q-positive `Omega_1` against a q-real and a
/// q-positive `Omega_2`.
pub fn diagonalization_suite(
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<DiagonalizationSuite, SimdiagError> {
    let frame = standard_frame(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DiagonalizationSuite {
        n,
        samples,
        max_orthogonality: 0.0,
        max_equivariance: 0.0,
        max_eigen_residual: 0.0,
        max_imaginary: 0.0,
        min_real: f64::INFINITY,
        failures: 0,
        pass: false,
    };
    for _ in 0..samples {
        let margin = rng.random_range(0.05..2.0);
        let o1 = random_q_positive(&mut rng, &frame, margin);
        let o2 = random_q_real(&mut rng, n);
        let v = random_vector(&mut rng, 2 * n);
        let t_scale = build_omega_tilde(&frame, &o1, &o2)?.norm() + 1.0;
        let equi = conj_equivariance_residual(&frame, &o1, &o2, &v)? / (v.norm() * t_scale);
        out.max_equivariance = out.max_equivariance.max(equi);
        match simultaneous_diagonalize(&frame, &o1, &o2) {
            Ok(r) => {
                out.max_orthogonality = out.max_orthogonality.max(r.residual);
                out.max_eigen_residual = out.max_eigen_residual.max(r.eigen_residual);
            }
            Err(_) => out.failures += 1,
        }
        let margin = rng.random_range(0.0..1.0);
        let o3 = random_q_positive(&mut rng, &frame, margin);
        match simultaneous_diagonalize(&frame, &o1, &o3) {
            Ok(r) => {
                out.max_orthogonality = out.max_orthogonality.max(r.residual);
                for l in &r.eigenvalues {
                    out.max_imaginary = out.max_imaginary.max(l.im.abs());
                    out.min_real = out.min_real.min(l.re);
                }
            }
            Err(_) => out.failures += 1,
        }
    }
    out.pass = out.failures == 0
        && out.max_orthogonality <= ORTHOGONALITY_TOL
        && out.max_equivariance <= EQUIVARIANCE_TOL
        && out.max_imaginary <= EIGENVALUE_TOL
        && out.min_real >= -EIGENVALUE_TOL;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSuite {
    pub samples: usize,
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Coefficients from random covectors and random q-positive `Omega_phi`
/// with `n` drawn from `1..=max_n`; every `k < n` and every `eps` in
/// [`EPSILONS`], `B = max |b_i|`.
pub fn coefficient_suite(
    max_n: usize,
    samples: usize,
    seed: u64,
) -> Result<CoefficientSuite, SimdiagError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<_> = (1..=max_n).map(standard_frame).collect();
    let mut out = CoefficientSuite {
        samples,
        checks: 0,
        violations: 0,
        max_ratio: 0.0,
        pass: false,
    };
    for _ in 0..samples {
        let n = rng.random_range(1..=max_n);
        let frame = &frames[n - 1];
        let margin = rng.random_range(0.0..1.0);
        let omega_phi = random_q_positive(&mut rng, frame, margin);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let dphi: DVector<_> = random_vector(&mut rng, 2 * n) * nalgebra::Complex::new(scale, 0.0);
        let beta = random_vector(&mut rng, 2 * n);
        let coeffs = PointwiseCoefficients::from_covectors(frame, &omega_phi, &dphi, &beta)?;
        let b = coeffs.b_max();
        for k in 0..n {
            for eps in EPSILONS {
                let (lhs, rhs) = coefficient_bound(&coeffs, k, eps, b);
                out.checks += 1;
                if lhs > rhs {
                    out.violations += 1;
                }
                if rhs > 0.0 {
                    out.max_ratio = out.max_ratio.max(lhs / rhs);
                }
            }
        }
    }
    out.pass = out.violations == 0;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSuite {
    pub fields: usize,
    /// `max |del del_J f + del_J del f| / max |del_J del f|`.
    pub max_anticommutator: f64,
    pub max_q_real: f64,
    pub max_energy_gap: f64,
    pub max_density_gap: f64,
    pub pass: bool,
}

fn operator_grids() -> Vec<SpectralGrid> {
    [
        (1usize, vec![0usize, 1, 2, 3], 6usize),
        (1, vec![0, 1], 16),
        (2, vec![0, 4], 16),
        (2, vec![0, 2, 5, 7], 6),
    ]
    .into_iter()
    .map(|(n, a, p)| SpectralGrid::new(n, &a, p).expect("valid grid"))
    .collect()
}

/// Random band-limited fields cycled over full and reduced grids for
/// `n = 1, 2`.
pub fn operator_suite(fields: usize, seed: u64) -> OperatorSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids = operator_grids();
    let mut out = OperatorSuite {
        fields,
        max_anticommutator: 0.0,
        max_q_real: 0.0,
        max_energy_gap: 0.0,
        max_density_gap: 0.0,
        pass: false,
    };
    for i in 0..fields {
        let grid = &grids[i % grids.len()];
        let f = band_limited(grid, &mut rng, 6, 2, 1.0);
        let a = FormField::from_scalar(&f).del_j().del();
        let b = FormField::from_scalar(&f).del().del_j();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        out.max_anticommutator = out.max_anticommutator.max(a.add(&b).max_abs() / scale);
        let hess = del_del_j(&f);
        out.max_q_real = out
            .max_q_real
            .max((hess.max_q_real_residual() / scale).abs());
        let e1 = gradient_energy(&f);
        let e2 = gradient_energy_coordinate(&f);
        out.max_energy_gap = out
            .max_energy_gap
            .max((e1 - e2).abs() / e2.abs().max(f64::MIN_POSITIVE));
        let phi = f.scale(0.01 / f.sup_norm().max(1.0));
        let d1 = ma_density_exterior(&phi);
        let d2 = ma_density_eigen(&phi);
        out.max_density_gap = out
            .max_density_gap
            .max(d1.sub(&d2).sup_norm() / d1.sup_norm());
    }
    out.pass = out.max_anticommutator <= ANTICOMMUTATION_TOL
        && out.max_q_real <= Q_REAL_TOL
        && out.max_energy_gap <= ENERGY_TOL
        && out.max_density_gap <= DENSITY_PATH_TOL;
    out
}
