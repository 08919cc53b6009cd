//! `(p,q)`-forms with respect to `I`, the left action of `J`, q-reality and
//! q-positivity of `(2,0)`-forms, and exact verification of the wedge
//! identities satisfied in a simultaneously diagonalizing frame.

mod form;
mod identities;
pub mod scalar;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::hypercomplex::{conj_j, HypercomplexFrame};
use crate::linalg::hermitian_eigenvalues;

pub use form::{Form, Mask};
pub use identities::{verify_wedge_identities, IdentityResidual, WedgeIdentityReport};
pub use scalar::{GaussianRational, Poly, Scalar, Var, VarKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("wedge product of total degree {degree} exceeds {max}")]
    DegreeOverflow { degree: usize, max: usize },
    #[error("bidegree mismatch: {left:?} vs {right:?}")]
    BidegreeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("quaternionic dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("form is not q-real (residual {residual:e})")]
    NotQReal { residual: f64 },
    #[error("identity check needs 1 <= n <= 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("nonzero residual in wedge identity {identity} at k = {k}: {residual}")]
    NonzeroResidual {
        identity: String,
        k: usize,
        residual: String,
    },
}

/// Default q-positivity test: eigenvalues of the pairing matrix must be at
/// least `-POSITIVITY_RTOL * (1 + largest eigenvalue)`.
pub const POSITIVITY_RTOL: f64 = 1e-10;

/// A `(2,0)`-form `sum_{i<j} A_ij dz_i ^ dz_j` stored as the full
/// antisymmetric `2n x 2n` matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormQ {
    a: DMatrix<Complex64>,
}

impl TwoFormQ {
    /// # Panics
    /// If `a` is not square of even size or not antisymmetric up to `1e-12`.
    pub fn new(a: DMatrix<Complex64>) -> Self {
        assert!(
            a.is_square() && a.nrows().is_multiple_of(2),
            "need an even square matrix"
        );
        let asym = (&a + a.transpose()).norm();
        assert!(
            asym <= 1e-12 * (1.0 + a.norm()),
            "coefficient matrix not antisymmetric ({asym:e})"
        );
        Self { a }
    }

    /// Antisymmetrizes `m` and wraps it.
    pub fn from_any(m: &DMatrix<Complex64>) -> Self {
        Self {
            a: (m - m.transpose()).scale(0.5),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(2 * n, 2 * n),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.a
    }

    /// `alpha(u, v) = u^T A v` for `(1,0)` vectors.
    pub fn eval(&self, u: &DVector<Complex64>, v: &DVector<Complex64>) -> Complex64 {
        (u.transpose() * &self.a * v)[(0, 0)]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            a: &self.a + &other.a,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            a: self.a.map(|x| x * c),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            a: self.a.map(|x| x.conj()),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.a.norm()
    }

    pub fn to_form(&self) -> Form<Complex64> {
        let d = self.a.nrows();
        let mut f = Form::zero(self.n(), 2, 0);
        for i in 0..d {
            for j in i + 1..d {
                f.add_term((1 << i) | (1 << j), self.a[(i, j)]);
            }
        }
        f
    }

    /// # Panics
    /// If `form` is not of type `(2,0)`.
    pub fn from_form(form: &Form<Complex64>) -> Self {
        assert_eq!(form.bidegree(), (2, 0), "expected a (2,0)-form");
        let d = 2 * form.n();
        let mut a = DMatrix::zeros(d, d);
        for (mask, c) in form.terms() {
            let i = mask.trailing_zeros() as usize;
            let j = (mask & (mask - 1)).trailing_zeros() as usize;
            a[(i, j)] = *c;
            a[(j, i)] = -*c;
        }
        Self { a }
    }

    /// Matrix `H` of the sesquilinear pairing `(Z, W) -> alpha(Z, conj(W) J)`,
    /// i.e. `alpha(Z, conj(Z) J) = Z^* H Z`. Hermitian when `alpha` is q-real.
    pub fn pairing_matrix(&self, frame: &HypercomplexFrame) -> DMatrix<Complex64> {
        let s = frame.j_block().map(|x| Complex64::new(x, 0.0));
        s * &self.a
    }

    /// `alpha(z, conj(w) J)`.
    pub fn pairing(&self, z: &DVector<Complex64>, w: &DVector<Complex64>) -> Complex64 {
        self.eval(z, &conj_j(w))
    }

    /// `|| J alpha - conj(alpha) ||` computed through the form action.
    pub fn q_real_residual(&self) -> f64 {
        let f = self.to_form();
        let diff = f.j_action().sub(&f.conj());
        diff.terms().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Projection `(beta + J conj(beta)) / 2` onto the q-real forms.
    pub fn q_real_part(&self) -> Self {
        let f = self.to_form();
        let jbar = f.conj().j_action();
        Self::from_form(&f.add(&jbar).scale(&Complex64::new(0.5, 0.0)))
    }
}

/// `Omega = sum_a dz_{2a} ^ dz_{2a+1}` (0-based).
pub fn standard_omega(frame: &HypercomplexFrame) -> TwoFormQ {
    let d = frame.complex_dim();
    let mut a = DMatrix::zeros(d, d);
    for slot in 0..frame.n() {
        a[(2 * slot, 2 * slot + 1)] = Complex64::new(1.0, 0.0);
        a[(2 * slot + 1, 2 * slot)] = Complex64::new(-1.0, 0.0);
    }
    TwoFormQ { a }
}

/// `Omega` as an exact form over any coefficient ring.
pub fn standard_omega_form<S: Scalar>(n: usize) -> Form<S> {
    let mut f = Form::zero(n, 2, 0);
    for slot in 0..n {
        f = f.add(&Form::monomial(n, &[2 * slot, 2 * slot + 1], &[], S::one()));
    }
    f
}

/// `J alpha = conj(alpha)` to within `tol` (Frobenius norm of the difference).
pub fn is_q_real(frame: &HypercomplexFrame, alpha: &TwoFormQ, tol: f64) -> bool {
    assert_eq!(frame.n(), alpha.n());
    alpha.q_real_residual() <= tol
}

/// Exact q-reality of a `(2k,0)`-form.
pub fn is_q_real_exact<S: Scalar>(alpha: &Form<S>) -> bool {
    alpha.j_action() == alpha.conj()
}

/// Eigenvalues of the Hermitian pairing `Z -> alpha(Z, conj(Z) J)`, ascending.
pub fn pairing_eigenvalues(frame: &HypercomplexFrame, alpha: &TwoFormQ) -> Vec<f64> {
    let h = alpha.pairing_matrix(frame);
    let sym = (&h + h.adjoint()).scale(0.5);
    hermitian_eigenvalues(&sym)
}

/// q-positivity with the scale-relative default tolerance.
pub fn is_q_positive(frame: &HypercomplexFrame, alpha: &TwoFormQ) -> Result<bool, ExteriorError> {
    is_q_positive_with(frame, alpha, POSITIVITY_RTOL)
}

/// `alpha(Z, conj(Z) J) >= 0` for all `(1,0)` vectors, up to
/// `-rtol * (1 + largest eigenvalue)`. Rejects forms that are not q-real.
pub fn is_q_positive_with(
    frame: &HypercomplexFrame,
    alpha: &TwoFormQ,
    rtol: f64,
) -> Result<bool, ExteriorError> {
    let residual = alpha.q_real_residual();
    if residual > 1e-10 * (1.0 + alpha.frobenius()) {
        return Err(ExteriorError::NotQReal { residual });
    }
    let eig = pairing_eigenvalues(frame, alpha);
    let max = eig.last().copied().unwrap_or(0.0);
    let min = eig.first().copied().unwrap_or(0.0);
    Ok(min >= -rtol * (1.0 + max.abs()))
}

/// `Omega_phi^n / Omega^n = prod phi_i`.
pub fn relative_eigen_density(phis: &[f64]) -> f64 {
    phis.iter().product()
}

/// `Omega^n / (n! dz_0 ^ ... ^ dz_{2n-1})` is 1, so the ratio of a complex
/// top form to `Omega^n` is its leading coefficient divided by `n!`.
pub fn ratio_to_omega_n(top: &Form<Complex64>) -> Complex64 {
    let n = top.n();
    let c = top.coefficient(Form::<Complex64>::top_holomorphic_mask(n));
    c / factorial(n)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `|Omega^n ^ conj(Omega)^n| = (n!)^2 4^n dx_1 ^ ... ^ dx_{4n}`: the positive
/// factor between the integration volume element and Lebesgue measure on
/// the unit torus. See [`volume_element_coefficient`] for the exact check.
pub fn volume_form_factor(n: usize) -> f64 {
    factorial(n).powi(2) * 4f64.powi(n as i32)
}

/// Exact coefficient `c` in `Omega^n ^ conj(Omega)^n = c dx_1 ^ ... ^ dx_{4n}`.
pub fn volume_element_coefficient(n: usize) -> GaussianRational {
    let omega: Form<GaussianRational> = standard_omega_form(n);
    let top = omega
        .power(n)
        .expect("degree")
        .wedge(&omega.conj().power(n).expect("degree"))
        .expect("degree");
    let full: Mask = (1u32 << (4 * n)) - 1;
    let c = top.coefficient(full);
    // dz_c and dzbar_c in terms of dx: rows are covectors in mask order
    let frame = crate::hypercomplex::standard_frame(n);
    let d = 4 * n;
    let mut rows = vec![vec![GaussianRational::zero(); d]; d];
    for c in 0..2 * n {
        for (k, v) in frame.coordinate_differential(c) {
            let g = GaussianRational::from_ints(v.re as i64, v.im as i64);
            rows[c][k] = g.clone();
            rows[2 * n + c][k] = g.conj();
        }
    }
    c * exact_determinant(rows)
}

/// `(Omega ^ conj(Omega))^n`, which coincides with `Omega^n ^ conj(Omega)^n`
/// because even forms commute.
pub fn mixed_volume_form(n: usize) -> Form<GaussianRational> {
    let omega: Form<GaussianRational> = standard_omega_form(n);
    omega
        .wedge(&omega.conj())
        .expect("degree")
        .power(n)
        .expect("degree")
}

fn exact_determinant(mut m: Vec<Vec<GaussianRational>>) -> GaussianRational {
    let d = m.len();
    let mut det = GaussianRational::one();
    for col in 0..d {
        let Some(pivot) = (col..d).find(|&r| !m[r][col].is_zero()) else {
            return GaussianRational::zero();
        };
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let inv = m[col][col].inv().expect("nonzero pivot");
        det = det * m[col][col].clone();
        for r in col + 1..d {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone() * inv.clone();
            let (top, rest) = m.split_at_mut(r);
            for (slot, p) in rest[0].iter_mut().zip(&top[col]).skip(col) {
                *slot = slot.clone() - factor.clone() * p.clone();
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercomplex::standard_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_two_form(rng: &mut impl Rng, n: usize) -> TwoFormQ {
        let m = DMatrix::from_fn(2 * n, 2 * n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        TwoFormQ::from_any(&m)
    }

    #[test]
    fn standard_omega_n1() {
        let f = standard_frame(1);
        let w = standard_omega(&f);
        assert_eq!(w.matrix()[(0, 1)], c(1.0, 0.0));
        assert_eq!(w.matrix()[(1, 0)], c(-1.0, 0.0));
        assert!(is_q_real(&f, &w, 0.0));
        let eig = pairing_eigenvalues(&f, &w);
        assert!(eig.iter().all(|e| (e - 1.0).abs() < 1e-15));
        assert!(is_q_positive(&f, &w).unwrap());
        assert!(!is_q_positive(&f, &w.scale(c(-1.0, 0.0))).unwrap());
    }

    #[test]
    fn omega_is_q_real_exactly() {
        for n in 1..=4 {
            assert!(is_q_real_exact(&standard_omega_form::<GaussianRational>(n)));
            let w = standard_omega(&standard_frame(n));
            assert_eq!(
                w.pairing_matrix(&standard_frame(n)),
                DMatrix::identity(2 * n, 2 * n)
            );
        }
    }

    #[test]
    fn i_times_omega_is_not_q_real() {
        let f = standard_frame(2);
        let w = standard_omega(&f).scale(c(0.0, 1.0));
        assert!(!is_q_real(&f, &w, 1e-6));
        assert!(matches!(
            is_q_positive(&f, &w),
            Err(ExteriorError::NotQReal { .. })
        ));
        let exact = standard_omega_form::<GaussianRational>(2).scale(&GaussianRational::i());
        assert!(!is_q_real_exact(&exact));
    }

    #[test]
    fn symmetrized_forms_are_q_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let f = standard_frame(n);
            for _ in 0..20 {
                let beta = random_two_form(&mut rng, n);
                let r = beta.q_real_part();
                assert!(is_q_real(&f, &r, 1e-13));
                // matrix form of the same condition: S^T A S = conj(A)
                let s = f.j_block().map(|x| c(x, 0.0));
                let lhs = s.transpose() * r.matrix() * &s;
                assert!((lhs - r.matrix().map(|x| x.conj())).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn q_real_forms_form_a_real_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = standard_frame(3);
        let a = random_two_form(&mut rng, 3).q_real_part();
        let b = random_two_form(&mut rng, 3).q_real_part();
        let comb = a.scale(c(1.7, 0.0)).add(&b.scale(c(-0.3, 0.0)));
        assert!(is_q_real(&f, &comb, 1e-13));
        assert!(!is_q_real(&f, &a.scale(c(0.0, 1.0)), 1e-6));
    }

    #[test]
    fn pairing_of_q_real_forms_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let f = standard_frame(n);
            for _ in 0..20 {
                let a = random_two_form(&mut rng, n).q_real_part();
                let h = a.pairing_matrix(&f);
                assert!((&h - h.adjoint()).norm() <= 1e-12);
                let z = DVector::from_fn(2 * n, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                let direct = a.pairing(&z, &z);
                let via_matrix = (z.adjoint() * &h * &z)[(0, 0)];
                assert!((direct - via_matrix).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_form_round_trip_and_j() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_two_form(&mut rng, 2);
        assert_eq!(TwoFormQ::from_form(&a.to_form()), a);
        let cst = c(0.4, -1.3);
        let lhs = a.scale(cst).to_form().j_action();
        let rhs = a.to_form().j_action().scale(&cst);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn relative_density_is_product() {
        assert_eq!(relative_eigen_density(&[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(relative_eigen_density(&[2.0, 3.0]), 6.0);
    }

    #[test]
    fn relative_density_matches_wedge_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            for _ in 0..10 {
                let phis: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
                let mut form = Form::<Complex64>::zero(n, 2, 0);
                for (a, p) in phis.iter().enumerate() {
                    form = form.add(&Form::monomial(n, &[2 * a, 2 * a + 1], &[], c(*p, 0.0)));
                }
                let ratio = ratio_to_omega_n(&form.power(n).unwrap());
                assert!((ratio - c(relative_eigen_density(&phis), 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn volume_element_constants() {
        for n in 1..=3 {
            let coeff = volume_element_coefficient(n).to_complex();
            assert!(coeff.im.abs() < 1e-12);
            assert!(
                (coeff.re.abs() - volume_form_factor(n)).abs() < 1e-9,
                "n={n}: {coeff}"
            );
            let omega: Form<GaussianRational> = standard_omega_form(n);
            let lhs = omega
                .power(n)
                .unwrap()
                .wedge(&omega.conj().power(n).unwrap())
                .unwrap();
            assert_eq!(mixed_volume_form(n), lhs);
        }
    }
}
