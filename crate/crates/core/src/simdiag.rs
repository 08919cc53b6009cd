//! Simultaneous diagonalization of a strictly q-positive `(2,0)`-form and a
//! q-real one, built inductively from eigenvectors of the endomorphism
//! `T` defined by `Omega_2(v, .) = Omega_1(T v, .)`, plus the pointwise
//! coefficient inequality used to absorb the mixed `d_J phi ^ beta` term.
//!
//! Vectors are `(1,0)` component columns. `sigma(v) = conj(v) J` is
//! [`conj_j`], and `h(Z, W) = Omega_1(Z, sigma W)` is the Hermitian form
//! that makes the construction an orthogonal one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::exterior::{pairing_eigenvalues, TwoFormQ};
use crate::hypercomplex::{conj_j, HypercomplexFrame};
use crate::linalg::schur_eigenpairs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimdiagError {
    #[error("reference form is not strictly q-positive (smallest pairing eigenvalue {min_eigenvalue:e})")]
    NotStrictlyPositive { min_eigenvalue: f64 },
    #[error("form is not q-real (residual {residual:e})")]
    NotQReal { residual: f64 },
    #[error("forms live on different dimensions: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no eigenvector within tolerance at step {step} (best residual {residual:e})")]
    Breakdown { step: usize, residual: f64 },
}

/// Relative threshold for strict positivity of the reference form.
pub const STRICT_POSITIVITY_RTOL: f64 = 1e-12;
/// Relative eigen-residual above which an induction step is a breakdown.
pub const BREAKDOWN_RTOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DiagonalizationResult {
    /// `e_1, ..., e_n`, each with `h(e_i, e_i) = 1`.
    pub basis: Vec<DVector<Complex64>>,
    pub eigenvalues: Vec<Complex64>,
    /// Largest off-diagonal pairing over the four families, relative to
    /// `||Omega_1|| + ||Omega_2||`.
    pub residual: f64,
    /// `max_i ||T e_i - lambda_i e_i||`, relative to `||T|| + 1`.
    pub eigen_residual: f64,
    /// Smallest singular value of `[e_1, sigma e_1, ..., e_n, sigma e_n]`.
    pub min_singular_value: f64,
}

impl DiagonalizationResult {
    /// `[e_1, sigma e_1, ..., e_n, sigma e_n]` as columns.
    pub fn full_basis(&self) -> DMatrix<Complex64> {
        let cols: Vec<DVector<Complex64>> = self
            .basis
            .iter()
            .flat_map(|e| [e.clone(), conj_j(e)])
            .collect();
        DMatrix::from_columns(&cols)
    }
}

/// Normalized basis with `Omega_1(e_i, sigma e_i) = 1`; `phis[i]` is then
/// `Omega_2(e_i, sigma e_i)`.
#[derive(Debug, Clone)]
pub struct NormalizedBasis {
    pub basis: Vec<DVector<Complex64>>,
    pub phis: Vec<f64>,
    /// Largest imaginary part discarded from the `phis`.
    pub imaginary_residual: f64,
}

fn check_dims(frame: &HypercomplexFrame, a: &TwoFormQ, b: &TwoFormQ) -> Result<(), SimdiagError> {
    if a.n() != frame.n() {
        return Err(SimdiagError::DimensionMismatch {
            left: frame.n(),
            right: a.n(),
        });
    }
    if b.n() != frame.n() {
        return Err(SimdiagError::DimensionMismatch {
            left: frame.n(),
            right: b.n(),
        });
    }
    Ok(())
}

fn check_strictly_positive(
    frame: &HypercomplexFrame,
    omega1: &TwoFormQ,
) -> Result<(), SimdiagError> {
    let residual = omega1.q_real_residual();
    if residual > 1e-10 * (1.0 + omega1.frobenius()) {
        return Err(SimdiagError::NotQReal { residual });
    }
    let eig = pairing_eigenvalues(frame, omega1);
    let min = eig[0];
    let max = *eig.last().unwrap();
    if min <= STRICT_POSITIVITY_RTOL * max.abs() || min <= 0.0 {
        return Err(SimdiagError::NotStrictlyPositive {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// `h(z, w) = Omega_1(z, sigma w)`: linear in `z`, antilinear in `w`.
fn h_pair(omega1: &TwoFormQ, z: &DVector<Complex64>, w: &DVector<Complex64>) -> Complex64 {
    omega1.eval(z, &conj_j(w))
}

/// An `h`-orthonormal quaternionic basis `v_1, ..., v_n` (so that
/// `v_1, sigma v_1, ...` is `h`-orthonormal) by Gram-Schmidt over pairs.
fn quaternionic_orthonormal_basis(omega1: &TwoFormQ) -> Vec<DVector<Complex64>> {
    let d = omega1.matrix().nrows();
    let mut chosen: Vec<DVector<Complex64>> = Vec::new();
    let mut span: Vec<DVector<Complex64>> = Vec::new();
    let candidates: Vec<DVector<Complex64>> = (0..d)
        .map(|k| {
            let mut e = DVector::zeros(d);
            e[k] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    while chosen.len() < d / 2 {
        let best = candidates
            .iter()
            .map(|c| project_out(omega1, c, &span))
            .map(|v| {
                let nrm = h_pair(omega1, &v, &v).re;
                (v, nrm)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("candidates");
        let mut v = best.0;
        // re-orthogonalize once for stability
        v = project_out(omega1, &v, &span);
        let nrm = h_pair(omega1, &v, &v).re.sqrt();
        v /= Complex64::new(nrm, 0.0);
        span.push(v.clone());
        span.push(conj_j(&v));
        chosen.push(v);
    }
    chosen
}

/// `x - sum_u h(x, u) u` over an `h`-orthonormal family.
fn project_out(
    omega1: &TwoFormQ,
    x: &DVector<Complex64>,
    family: &[DVector<Complex64>],
) -> DVector<Complex64> {
    let mut v = x.clone();
    for u in family {
        let c = h_pair(omega1, &v, u);
        v -= u * c;
    }
    v
}

/// Matrix of `T` with `Omega_2(v, .) = Omega_1(T v, .)`, built as
/// `T v = sum_i (Omega_2(v, sigma v_i) v_i - Omega_2(v, v_i) sigma v_i)`
/// over an `Omega_1`-orthonormal quaternionic basis `v_i`.
pub fn build_omega_tilde(
    frame: &HypercomplexFrame,
    omega1: &TwoFormQ,
    omega2: &TwoFormQ,
) -> Result<DMatrix<Complex64>, SimdiagError> {
    check_dims(frame, omega1, omega2)?;
    check_strictly_positive(frame, omega1)?;
    Ok(omega_tilde_unchecked(omega1, omega2))
}

fn omega_tilde_unchecked(omega1: &TwoFormQ, omega2: &TwoFormQ) -> DMatrix<Complex64> {
    let d = omega1.matrix().nrows();
    let basis = quaternionic_orthonormal_basis(omega1);
    let mut t = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut e = DVector::zeros(d);
        e[k] = Complex64::new(1.0, 0.0);
        let mut col = DVector::zeros(d);
        for v in &basis {
            let sv = conj_j(v);
            col += v * omega2.eval(&e, &sv);
            col -= &sv * omega2.eval(&e, v);
        }
        t.set_column(k, &col);
    }
    t
}

/// `||T(sigma v) - sigma(T v)||`.
pub fn conj_equivariance_residual(
    frame: &HypercomplexFrame,
    omega1: &TwoFormQ,
    omega2: &TwoFormQ,
    v: &DVector<Complex64>,
) -> Result<f64, SimdiagError> {
    let t = build_omega_tilde(frame, omega1, omega2)?;
    Ok((&t * conj_j(v) - conj_j(&(&t * v))).norm())
}

/// Largest of `|Omega_a(e_i, e_j)|`, `|Omega_a(e_i, sigma e_j)|` for `i != j`
/// and `a = 1, 2`, relative to `||Omega_1|| + ||Omega_2||`.
pub fn orthogonality_residual(
    omega1: &TwoFormQ,
    omega2: &TwoFormQ,
    basis: &[DVector<Complex64>],
) -> f64 {
    let scale = omega1.frobenius() + omega2.frobenius();
    let mut worst: f64 = 0.0;
    for (i, ei) in basis.iter().enumerate() {
        for (j, ej) in basis.iter().enumerate() {
            if i == j {
                continue;
            }
            let sej = conj_j(ej);
            for form in [omega1, omega2] {
                worst = worst
                    .max(form.eval(ei, ej).norm())
                    .max(form.eval(ei, &sej).norm());
            }
        }
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

/// `h`-orthonormal basis of the `h`-orthogonal complement of `span`.
fn complement_basis(omega1: &TwoFormQ, span: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let d = omega1.matrix().nrows();
    let target = d - span.len();
    let mut out: Vec<DVector<Complex64>> = Vec::new();
    let mut remaining: Vec<DVector<Complex64>> = (0..d)
        .map(|k| {
            let mut e = DVector::zeros(d);
            e[k] = Complex64::new(1.0, 0.0);
            project_out(omega1, &e, span)
        })
        .collect();
    while out.len() < target {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, v)| (i, h_pair(omega1, v, v).re))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("candidates");
        let mut v = remaining.swap_remove(idx);
        v = project_out(omega1, &project_out(omega1, &v, span), &out);
        let nrm = h_pair(omega1, &v, &v).re.sqrt();
        v /= Complex64::new(nrm, 0.0);
        for r in remaining.iter_mut() {
            let c = h_pair(omega1, r, &v);
            *r -= &v * c;
        }
        out.push(v);
    }
    out
}

/// Simultaneous diagonalization: at each step restrict `T` to the
/// `h`-orthogonal complement of the vectors chosen so far, take the
/// eigenvector of the restriction with the smallest residual, and add it
/// together with its `sigma` companion.
pub fn simultaneous_diagonalize(
    frame: &HypercomplexFrame,
    omega1: &TwoFormQ,
    omega2: &TwoFormQ,
) -> Result<DiagonalizationResult, SimdiagError> {
    let t = build_omega_tilde(frame, omega1, omega2)?;
    let n = frame.n();
    let t_scale = t.norm() + 1.0;
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut span: Vec<DVector<Complex64>> = Vec::new();
    for step in 0..n {
        let w = complement_basis(omega1, &span);
        let m = w.len();
        let tw: Vec<DVector<Complex64>> = w.iter().map(|x| &t * x).collect();
        let r = DMatrix::from_fn(m, m, |a, b| h_pair(omega1, &tw[b], &w[a]));
        let wmat = DMatrix::from_columns(&w);
        let mut best: Option<(f64, Complex64, DVector<Complex64>)> = None;
        for pair in schur_eigenpairs(&r) {
            let mut e = &wmat * &pair.vector;
            let nrm = h_pair(omega1, &e, &e).re.sqrt();
            e /= Complex64::new(nrm, 0.0);
            let res = (&t * &e - &e * pair.value).norm() / t_scale;
            let better = match &best {
                None => true,
                Some((bres, bval, _)) => {
                    res < bres * (1.0 - 1e-9)
                        || ((res - bres).abs() <= 1e-9 * bres.max(1e-300)
                            && pair.value.norm() > bval.norm())
                }
            };
            if better {
                best = Some((res, pair.value, e));
            }
        }
        let (res, value, e) = best.expect("nonempty restriction");
        if res > BREAKDOWN_RTOL {
            return Err(SimdiagError::Breakdown {
                step,
                residual: res,
            });
        }
        span.push(e.clone());
        span.push(conj_j(&e));
        basis.push(e);
        eigenvalues.push(value);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[a]
            .re
            .total_cmp(&eigenvalues[b].re)
            .then(a.cmp(&b))
    });
    let basis: Vec<_> = order.iter().map(|&i| basis[i].clone()).collect();
    let eigenvalues: Vec<_> = order.iter().map(|&i| eigenvalues[i]).collect();
    let eigen_residual = basis
        .iter()
        .zip(&eigenvalues)
        .map(|(e, l)| (&t * e - e * *l).norm() / t_scale)
        .fold(0.0, f64::max);
    let residual = orthogonality_residual(omega1, omega2, &basis);
    let mut result = DiagonalizationResult {
        basis,
        eigenvalues,
        residual,
        eigen_residual,
        min_singular_value: 0.0,
    };
    let sv = result.full_basis().singular_values();
    result.min_singular_value = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(result)
}

/// Rescales so that `Omega_1(e_i, sigma e_i) = 1` and reads off
/// `phi_i = Omega_2(e_i, sigma e_i)`.
pub fn normalize_to_standard(
    result: &DiagonalizationResult,
    omega1: &TwoFormQ,
    omega2: &TwoFormQ,
) -> NormalizedBasis {
    let mut basis = Vec::with_capacity(result.basis.len());
    let mut phis = Vec::with_capacity(result.basis.len());
    let mut imaginary_residual: f64 = 0.0;
    for e in &result.basis {
        let w = h_pair(omega1, e, e);
        assert!(w.re > 0.0, "zero-norm basis vector");
        let e = e / Complex64::new(w.re.sqrt(), 0.0);
        let p = omega2.eval(&e, &conj_j(&e));
        imaginary_residual = imaginary_residual.max(p.im.abs());
        phis.push(p.re);
        basis.push(e);
    }
    NormalizedBasis {
        basis,
        phis,
        imaginary_residual,
    }
}

/// Largest entry of `Omega_2` in the basis `e_1, sigma e_1, ...` outside the
/// diagonal `2 x 2` blocks, relative to `||Omega_2|| + 1`.
pub fn block_diagonal_residual(omega2: &TwoFormQ, basis: &[DVector<Complex64>]) -> f64 {
    let cols: Vec<DVector<Complex64>> = basis.iter().flat_map(|e| [e.clone(), conj_j(e)]).collect();
    let p = DMatrix::from_columns(&cols);
    let m = p.transpose() * omega2.matrix() * &p;
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i / 2 != j / 2 {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst / (omega2.frobenius() + 1.0)
}

/// Smallest singular value of the normalized eigenvector matrix of
/// `Omega_1^{-1} Omega_2`, without any positivity check. Near zero when
/// the pair cannot be diagonalized at all.
pub fn eigenbasis_defect(omega1: &TwoFormQ, omega2: &TwoFormQ) -> Option<f64> {
    let inv = omega1.matrix().clone().try_inverse()?;
    let t = inv * omega2.matrix();
    let cols: Vec<DVector<Complex64>> =
        schur_eigenpairs(&t).into_iter().map(|p| p.vector).collect();
    let m = DMatrix::from_columns(&cols);
    Some(
        m.singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    )
}

/// Coefficients at one point: `a` of `d phi`, `b` of `beta` in a unitary
/// diagonalizing basis (`b_{2i}, b_{2i+1}` against `e_i, sigma e_i`), and
/// the relative eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseCoefficients {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub phis: Vec<f64>,
}

impl PointwiseCoefficients {
    pub fn n(&self) -> usize {
        self.phis.len()
    }

    /// Expresses the `(1,0)`-covectors `dphi` and `beta` (components against
    /// `dz_c`) in the basis that diagonalizes `omega_phi` against the
    /// standard form, normalized to be unitary.
    pub fn from_covectors(
        frame: &HypercomplexFrame,
        omega_phi: &TwoFormQ,
        dphi: &DVector<Complex64>,
        beta: &DVector<Complex64>,
    ) -> Result<Self, SimdiagError> {
        let omega = crate::exterior::standard_omega(frame);
        let diag = simultaneous_diagonalize(frame, &omega, omega_phi)?;
        let norm = normalize_to_standard(&diag, &omega, omega_phi);
        let mut a = Vec::with_capacity(2 * frame.n());
        let mut b = Vec::with_capacity(2 * frame.n());
        for e in &norm.basis {
            for u in [e.clone(), conj_j(e)] {
                a.push(dphi.dot(&u));
                b.push(beta.dot(&u));
            }
        }
        Ok(Self {
            a,
            b,
            phis: norm.phis,
        })
    }

    /// `max |b_i|`, the constant used on the right-hand side.
    pub fn b_max(&self) -> f64 {
        self.b.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Both sides of the coefficient inequality
/// `sum_I sum_{j not in I} (|a_2j||b_2j| + |a_2j+1||b_2j+1|) phi_I
///   <= B eps (n-k) e_k(phi) + (B/eps) sum_I sum_{j not in I} (|a_2j|^2 + |a_2j+1|^2) phi_I`,
/// sums over `k`-subsets `I`.
pub fn coefficient_bound(coeffs: &PointwiseCoefficients, k: usize, eps: f64, b: f64) -> (f64, f64) {
    let n = coeffs.n();
    assert!(k < n, "need k <= n - 1");
    assert!(eps > 0.0, "need eps > 0");
    let mut lhs = 0.0;
    let mut ek = 0.0;
    let mut grad = 0.0;
    for set in subsets(n, k) {
        let prod: f64 = set.iter().map(|&i| coeffs.phis[i]).product();
        let mut mixed = 0.0;
        let mut sq = 0.0;
        for j in (0..n).filter(|j| !set.contains(j)) {
            for c in [2 * j, 2 * j + 1] {
                mixed += coeffs.a[c].norm() * coeffs.b[c].norm();
                sq += coeffs.a[c].norm_sqr();
            }
        }
        lhs += mixed * prod;
        grad += sq * prod;
        ek += prod;
    }
    let rhs = b * eps * (n - k) as f64 * ek + b / eps * grad;
    (lhs, rhs)
}

/// Random-instance helpers shared by tests and the CLI suites.
pub mod sampling {
    use super::*;
    use crate::exterior::standard_omega;
    use rand::Rng;

    pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    pub fn random_vector(rng: &mut impl Rng, d: usize) -> DVector<Complex64> {
        DVector::from_fn(d, |_, _| random_complex(rng))
    }

    pub fn random_two_form(rng: &mut impl Rng, n: usize) -> TwoFormQ {
        let m = DMatrix::from_fn(2 * n, 2 * n, |_, _| random_complex(rng));
        TwoFormQ::from_any(&m)
    }

    pub fn random_q_real(rng: &mut impl Rng, n: usize) -> TwoFormQ {
        random_two_form(rng, n).q_real_part()
    }

    /// q-real form shifted by a multiple of `Omega` so that its smallest
    /// pairing eigenvalue equals `margin`.
    pub fn random_q_positive(
        rng: &mut impl Rng,
        frame: &HypercomplexFrame,
        margin: f64,
    ) -> TwoFormQ {
        let a = random_q_real(rng, frame.n());
        let min = pairing_eigenvalues(frame, &a)[0];
        a.add(&standard_omega(frame).scale(Complex64::new(margin - min, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::sampling::*;
    use super::*;
    use crate::exterior::{standard_omega, POSITIVITY_RTOL};
    use crate::hypercomplex::standard_frame;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_and_zero_endomorphisms() {
        let f = standard_frame(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o1 = random_q_positive(&mut rng, &f, 0.5);
        let t = build_omega_tilde(&f, &o1, &o1).unwrap();
        assert!((t - DMatrix::identity(4, 4)).norm() < 1e-12);
        let t0 = build_omega_tilde(&f, &o1, &TwoFormQ::zero(2)).unwrap();
        assert!(t0.norm() < 1e-14);
    }

    #[test]
    fn defining_relation_n3() {
        let f = standard_frame(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o1 = random_q_positive(&mut rng, &f, 0.3);
        let o2 = random_q_real(&mut rng, 3);
        let t = build_omega_tilde(&f, &o1, &o2).unwrap();
        let oracle = o1.matrix().clone().try_inverse().unwrap() * o2.matrix();
        assert!((&t - oracle).norm() < 1e-11);
        for _ in 0..100 {
            let v = random_vector(&mut rng, 6);
            let w = random_vector(&mut rng, 6);
            let lhs = o2.eval(&v, &w);
            let rhs = o1.eval(&(&t * &v), &w);
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn equivariance_positive_and_negative_controls() {
        let f = standard_frame(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o1 = random_q_positive(&mut rng, &f, 0.4);
        let v = random_vector(&mut rng, 4);
        assert!(conj_equivariance_residual(&f, &o1, &o1, &v).unwrap() < 1e-12);
        for _ in 0..20 {
            let o2 = random_q_real(&mut rng, 2);
            assert!(conj_equivariance_residual(&f, &o1, &o2, &v).unwrap() <= 1e-11);
        }
        let bad = random_two_form(&mut rng, 2);
        assert!(conj_equivariance_residual(&f, &o1, &bad, &v).unwrap() > 1e-6);
    }

    #[test]
    fn rejects_non_positive_reference() {
        let f = standard_frame(2);
        let omega = standard_omega(&f);
        let neg = omega.scale(c(-1.0));
        assert!(matches!(
            simultaneous_diagonalize(&f, &neg, &omega),
            Err(SimdiagError::NotStrictlyPositive { .. })
        ));
        let not_real = omega.scale(Complex64::new(0.0, 1.0));
        assert!(matches!(
            simultaneous_diagonalize(&f, &not_real, &omega),
            Err(SimdiagError::NotQReal { .. })
        ));
        assert!(matches!(
            simultaneous_diagonalize(&f, &omega, &TwoFormQ::zero(3)),
            Err(SimdiagError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonalize_equal_forms() {
        let f = standard_frame(3);
        let omega = standard_omega(&f);
        let r = simultaneous_diagonalize(&f, &omega, &omega).unwrap();
        for l in &r.eigenvalues {
            assert!((l - c(1.0)).norm() < 1e-14);
        }
        assert!(r.residual < 1e-15);
        assert!(r.min_singular_value > 0.99);
    }

    #[test]
    fn scaling_gives_constant_phis() {
        let f = standard_frame(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o1 = random_q_positive(&mut rng, &f, 1.0);
        let o2 = o1.scale(c(2.0));
        let r = simultaneous_diagonalize(&f, &o1, &o2).unwrap();
        let norm = normalize_to_standard(&r, &o1, &o2);
        for p in &norm.phis {
            assert!((p - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_instances_diagonalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            let f = standard_frame(n);
            for _ in 0..50 {
                let margin = rng.random_range(0.05..2.0);
                let o1 = random_q_positive(&mut rng, &f, margin);
                let o2 = random_q_real(&mut rng, n);
                let r = simultaneous_diagonalize(&f, &o1, &o2).unwrap();
                assert!(r.residual <= 1e-10, "n={n} residual {}", r.residual);
                assert!(r.eigen_residual <= 1e-10);
                assert!(r.min_singular_value > 1e-8);
                for l in &r.eigenvalues {
                    assert!(l.im.abs() <= 1e-9);
                }
                let t = build_omega_tilde(&f, &o1, &o2).unwrap();
                for (e, l) in r.basis.iter().zip(&r.eigenvalues) {
                    let se = conj_j(e);
                    assert!((&t * &se - &se * l.conj()).norm() < 1e-9);
                }
                let norm = normalize_to_standard(&r, &o1, &o2);
                assert!(block_diagonal_residual(&o2, &norm.basis) < 1e-10);
                assert!(norm.imaginary_residual < 1e-10);
            }
        }
    }

    #[test]
    fn q_positive_second_form_has_nonnegative_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=4 {
            let f = standard_frame(n);
            for _ in 0..30 {
                let o1 = random_q_positive(&mut rng, &f, 0.5);
                let o2 = random_q_positive(&mut rng, &f, 0.0);
                let r = simultaneous_diagonalize(&f, &o1, &o2).unwrap();
                for l in &r.eigenvalues {
                    assert!(l.im.abs() <= 1e-9 && l.re >= -1e-9, "{l}");
                }
            }
        }
    }

    #[test]
    fn pairing_matrix_counterexample_is_not_diagonalizable() {
        // h1 = [[0,1],[1,0]], h2 = [[1,0],[0,0]] as quaternionic Hermitian
        // matrices: both indefinite or degenerate, T nilpotent.
        let f = standard_frame(2);
        let s = f.j_block().map(c);
        let lift = |h: [[f64; 2]; 2]| {
            let mut m = DMatrix::zeros(4, 4);
            for a in 0..2 {
                for b in 0..2 {
                    m[(2 * a, 2 * b)] = c(h[a][b]);
                    m[(2 * a + 1, 2 * b + 1)] = c(h[a][b]);
                }
            }
            TwoFormQ::new(-(&s * m))
        };
        let o1 = lift([[0.0, 1.0], [1.0, 0.0]]);
        let o2 = lift([[1.0, 0.0], [0.0, 0.0]]);
        assert!(o1.q_real_residual() < 1e-15 && o2.q_real_residual() < 1e-15);
        assert!(!crate::exterior::is_q_positive_with(&f, &o1, POSITIVITY_RTOL).unwrap());
        assert!(matches!(
            simultaneous_diagonalize(&f, &o1, &o2),
            Err(SimdiagError::NotStrictlyPositive { .. })
        ));
        let t = o1.matrix().clone().try_inverse().unwrap() * o2.matrix();
        assert!(t.norm() > 0.5 && (&t * &t).norm() < 1e-14);
        assert!(eigenbasis_defect(&o1, &o2).unwrap() < 1e-6);
    }

    #[test]
    fn quadratic_potential_eigenvalue() {
        // phi = c |q|^2 gives Omega_phi = (1 + 2c) Omega.
        let f = standard_frame(1);
        let omega = standard_omega(&f);
        for cst in [0.0, 0.25, 1.5] {
            let o2 = omega.scale(c(1.0 + 4.0 * cst * 0.5));
            let r = simultaneous_diagonalize(&f, &omega, &o2).unwrap();
            let norm = normalize_to_standard(&r, &omega, &o2);
            assert!((norm.phis[0] - (1.0 + 2.0 * cst)).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficient_bound_worked_example() {
        let z = Complex64::new(0.0, 0.0);
        let coeffs = PointwiseCoefficients {
            a: vec![c(1.0), z, z, z],
            b: vec![c(1.0), z, z, z],
            phis: vec![0.7, 2.0],
        };
        let (lhs, rhs) = coefficient_bound(&coeffs, 0, 1.0, 1.0);
        assert_eq!((lhs, rhs), (1.0, 3.0));
        let zero = PointwiseCoefficients {
            a: vec![z; 4],
            b: vec![c(1.0); 4],
            phis: vec![1.0, 1.0],
        };
        let (l, r) = coefficient_bound(&zero, 1, 0.5, 1.0);
        assert_eq!(l, 0.0);
        assert!(r >= 0.0);
    }

    #[test]
    fn coefficients_from_covectors_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=3 {
            let f = standard_frame(n);
            for _ in 0..20 {
                let op = random_q_positive(&mut rng, &f, 0.1);
                let dphi = random_vector(&mut rng, 2 * n);
                let beta = random_vector(&mut rng, 2 * n);
                let coeffs = PointwiseCoefficients::from_covectors(&f, &op, &dphi, &beta).unwrap();
                for bi in &coeffs.b {
                    assert!(bi.norm() <= beta.norm() * (1.0 + 1e-12));
                }
                let total: f64 = coeffs.a.iter().map(|x| x.norm_sqr()).sum();
                assert!((total - dphi.norm_squared()).abs() < 1e-10 * (1.0 + total));
                for k in 0..n {
                    let (l, r) = coefficient_bound(&coeffs, k, 0.3, coeffs.b_max());
                    assert!(l <= r);
                }
            }
        }
    }

    fn arb_coeffs() -> impl Strategy<Value = PointwiseCoefficients> {
        (1usize..=4).prop_flat_map(|n| {
            let cplx = (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| Complex64::new(a, b));
            (
                prop::collection::vec(cplx.clone(), 2 * n),
                prop::collection::vec(cplx, 2 * n),
                prop::collection::vec(0.0..10.0f64, n),
            )
                .prop_map(|(a, b, phis)| PointwiseCoefficients { a, b, phis })
        })
    }

    proptest! {
        #[test]
        fn coefficient_inequality_holds(coeffs in arb_coeffs(), k_seed in 0usize..4, eps_idx in 0usize..3) {
            let k = k_seed % coeffs.n();
            let eps = [0.01, 1.0, 100.0][eps_idx];
            let (lhs, rhs) = coefficient_bound(&coeffs, k, eps, coeffs.b_max());
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn diagonalization_residual_small(seed in any::<u64>(), n in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = standard_frame(n);
            let o1 = random_q_positive(&mut rng, &f, 0.2);
            let o2 = random_q_real(&mut rng, n);
            let r = simultaneous_diagonalize(&f, &o1, &o2).unwrap();
            prop_assert!(r.residual <= 1e-10);
        }
    }
}
