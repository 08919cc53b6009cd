//! Small dense complex linear algebra helpers.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// An eigenpair candidate extracted from a complex Schur form.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
    /// `|| M v - lambda v || / || v ||` measured on the input matrix.
    pub residual: f64,
    /// Position in the Schur form.
    pub position: usize,
}

const SCHUR_MAX_SWEEPS: usize = 2000;

/// `M = Q T Q^*`. The plain QR iteration can cycle on some inputs; those are
/// retried under fixed unitary similarities `U^* M U`, giving `Q = U Q'`.
pub fn schur_form(m: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS) {
        return s.unpack();
    }
    let d = m.nrows();
    for attempt in 1..=8 {
        let u = fixed_unitary(d, attempt);
        let conj = u.adjoint() * m * &u;
        if let Some(s) = Schur::try_new(conj, f64::EPSILON, SCHUR_MAX_SWEEPS) {
            let (q, t) = s.unpack();
            return (u * q, t);
        }
    }
    let s = Schur::try_new(m.clone(), 1e-12, 20 * SCHUR_MAX_SWEEPS)
        .expect("Schur iteration failed to converge");
    s.unpack()
}

/// Unitary from the QR factor of a deterministic dense matrix.
fn fixed_unitary(d: usize, attempt: usize) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d, |i, j| {
        let t = (attempt * 7919 + i * 104_729 + j * 1_299_709) as f64;
        Complex64::new(
            (0.7 * t).sin() + if i == j { 2.0 } else { 0.0 },
            (1.3 * t).cos(),
        )
    });
    a.qr().q()
}

/// Eigenpairs of a general complex matrix via the complex Schur form
/// `M = Q T Q^*`: the eigenvector for the `k`-th diagonal entry is `Q y` with
/// `y` from back substitution in `T`. The first Schur vector is always an
/// exact eigenvector of the computed form; later ones may lose accuracy when
/// eigenvalues cluster, which the returned residual exposes.
pub fn schur_eigenpairs(m: &DMatrix<Complex64>) -> Vec<EigenPair> {
    let d = m.nrows();
    if d == 0 {
        return Vec::new();
    }
    let (q, t) = schur_form(m);
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let lambda = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(d);
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[l];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < 1e-14 * scale {
                denom = Complex64::new(1e-14 * scale, 0.0);
            }
            y[j] = -s / denom;
        }
        let mut v = &q * y;
        let nv = v.norm();
        v /= Complex64::new(nv, 0.0);
        let residual = (m * &v - &v * lambda).norm();
        out.push(EigenPair {
            value: lambda,
            vector: v,
            residual,
            position: k,
        });
    }
    out
}

/// Pfaffian of an antisymmetric matrix by expansion along the first row.
pub fn pfaffian(a: &DMatrix<Complex64>) -> Complex64 {
    let d = a.nrows();
    assert!(
        a.is_square() && d.is_multiple_of(2),
        "pfaffian needs an even square matrix"
    );
    let idx: Vec<usize> = (0..d).collect();
    pfaffian_rec(a, &idx)
}

fn pfaffian_rec(a: &DMatrix<Complex64>, idx: &[usize]) -> Complex64 {
    match idx.len() {
        0 => Complex64::new(1.0, 0.0),
        2 => a[(idx[0], idx[1])],
        _ => {
            let first = idx[0];
            let mut total = Complex64::new(0.0, 0.0);
            for (pos, &j) in idx.iter().enumerate().skip(1) {
                let entry = a[(first, j)];
                if entry == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rest: Vec<usize> = idx[1..].iter().copied().filter(|&x| x != j).collect();
                let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
                total += entry * sign * pfaffian_rec(a, &rest);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in [2, 4, 6, 8] {
            let m = DMatrix::from_fn(d, d, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let a = &m - m.transpose();
            let pf = pfaffian(&a);
            let det = a.determinant();
            assert!((pf * pf - det).norm() < 1e-10 * (1.0 + det.norm()));
        }
        let mut std = DMatrix::zeros(4, 4);
        std[(0, 1)] = c(1.0, 0.0);
        std[(1, 0)] = c(-1.0, 0.0);
        std[(2, 3)] = c(1.0, 0.0);
        std[(3, 2)] = c(-1.0, 0.0);
        assert_eq!(pfaffian(&std), c(1.0, 0.0));
    }

    #[test]
    fn schur_eigenpairs_of_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = DMatrix::from_fn(6, 6, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let pairs = schur_eigenpairs(&m);
        assert_eq!(pairs.len(), 6);
        for p in &pairs {
            assert!(p.residual < 1e-10, "{}", p.residual);
        }
        let trace: Complex64 = pairs.iter().map(|p| p.value).sum();
        assert!((trace - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn schur_survives_nearly_diagonal_input() {
        let (a, b, e) = (
            1.9079071452708174,
            1.3766539411048802,
            -1.0704807181517488e-13,
        );
        let entries = [
            a, 0.0, e, 0.0, 0.0, b, 0.0, e, e, 0.0, b, 0.0, 0.0, e, 0.0, a,
        ];
        let m = DMatrix::from_iterator(4, 4, entries.iter().map(|&x| c(x, 0.0)));
        let pairs = schur_eigenpairs(&m);
        for p in &pairs {
            assert!(p.residual < 1e-12, "{}", p.residual);
            assert!((p.value.re - a).abs() < 1e-12 || (p.value.re - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_eigenvalues_sorted() {
        let h =
            DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let ev = hermitian_eigenvalues(&h);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
