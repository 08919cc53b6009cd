//! Exact check of the wedge identities that hold in a frame where
//! `Omega = sum e_i^* ^ J^{-1}(conj e_i^*)` and
//! `Omega_phi = sum phi_i e_i^* ^ J^{-1}(conj e_i^*)`.
//!
//! In the standard coordinates this frame is `e_i^* = dz_{2i}`,
//! `J^{-1}(conj e_i^*) = dz_{2i+1}`. With indeterminate coefficients
//! `phi_i` (real), `a_c`, `b_c` (complex), the identities read, for
//! `Omega^n` as the reference top form,
//!
//! ```text
//! Omega_phi^k ^ Omega^{n-k}                     = k!(n-k)!/n!   e_k(phi) Omega^n
//! d phi ^ d_J phi ^ Omega_phi^k ^ Omega^{n-k-1} = k!(n-k-1)!/n! sum_I (sum_{j not in I} |a|^2) phi_I Omega^n
//! d_J phi ^ beta ^ Omega_phi^k ^ Omega^{n-k-1}  = k!(n-k-1)!/n! sum_I (sum_{j not in I} -conj(a) b) phi_I Omega^n
//! ```
//!
//! where `d phi = sum a_c dz_c`, `beta = sum b_c dz_c` and
//! `d_J phi = J^{-1}(conj(d phi))`.

use serde::Serialize;

use super::scalar::{GaussianRational, Poly, Scalar, Var};
use super::{standard_omega_form, ExteriorError, Form};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub k: usize,
    pub nonzero_terms: usize,
    pub residual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WedgeIdentityReport {
    pub n: usize,
    pub residuals: Vec<IdentityResidual>,
    pub all_zero: bool,
}

fn factorial_i64(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// One identity: the residual `lhs - rhs` as a form (zero when it holds).
pub(crate) struct IdentityInstance<S: Scalar> {
    pub name: &'static str,
    pub k: usize,
    pub residual: Form<S>,
}

/// Builds the residual forms of all three identities for every admissible
/// `k`. `ratio(num, den)` embeds a rational number into the ring.
pub(crate) fn identity_residuals<S: Scalar>(
    n: usize,
    phi: &[S],
    a: &[S],
    b: &[S],
    ratio: impl Fn(i64, i64) -> S,
) -> Result<Vec<IdentityInstance<S>>, ExteriorError> {
    assert_eq!(phi.len(), n);
    assert_eq!(a.len(), 2 * n);
    assert_eq!(b.len(), 2 * n);
    let omega: Form<S> = standard_omega_form(n);
    let mut omega_phi = Form::zero(n, 2, 0);
    for (i, p) in phi.iter().enumerate() {
        omega_phi = omega_phi.add(&Form::monomial(n, &[2 * i, 2 * i + 1], &[], p.clone()));
    }
    let mut dphi = Form::zero(n, 1, 0);
    let mut beta = Form::zero(n, 1, 0);
    for c in 0..2 * n {
        dphi = dphi.add(&Form::dz(n, c).scale(&a[c]));
        beta = beta.add(&Form::dz(n, c).scale(&b[c]));
    }
    let dj_phi = dphi.conj().j_inverse();
    let omega_n = omega.power(n)?;
    let nf = factorial_i64(n);

    let phi_product = |set: &[usize]| set.iter().fold(S::one(), |acc, &i| acc * phi[i].clone());
    let complement = |set: &[usize]| (0..n).filter(move |j| !set.contains(j)).collect::<Vec<_>>();

    let mut out = Vec::new();
    for k in 0..=n {
        let lhs = omega_phi.power(k)?.wedge(&omega.power(n - k)?)?;
        let ek = subsets(n, k)
            .iter()
            .fold(S::zero(), |acc, s| acc + phi_product(s));
        let coeff = ratio(factorial_i64(k) * factorial_i64(n - k), nf) * ek;
        out.push(IdentityInstance {
            name: "omega_phi^k ^ omega^(n-k)",
            k,
            residual: lhs.sub(&omega_n.scale(&coeff)),
        });
    }
    let grad = dphi.wedge(&dj_phi)?;
    let mixed = dj_phi.wedge(&beta)?;
    for k in 0..n {
        let tail = omega_phi.power(k)?.wedge(&omega.power(n - k - 1)?)?;
        let c = ratio(factorial_i64(k) * factorial_i64(n - k - 1), nf);
        let mut sum_grad = S::zero();
        let mut sum_mixed = S::zero();
        for set in subsets(n, k) {
            let mut g = S::zero();
            let mut m = S::zero();
            for j in complement(&set) {
                for cidx in [2 * j, 2 * j + 1] {
                    g = g + a[cidx].clone() * a[cidx].conj();
                    m = m - a[cidx].conj() * b[cidx].clone();
                }
            }
            sum_grad = sum_grad + g * phi_product(&set);
            sum_mixed = sum_mixed + m * phi_product(&set);
        }
        let lhs = grad.wedge(&tail)?;
        out.push(IdentityInstance {
            name: "d phi ^ d_J phi ^ omega_phi^k ^ omega^(n-k-1)",
            k,
            residual: lhs.sub(&omega_n.scale(&(c.clone() * sum_grad))),
        });
        let lhs = mixed.wedge(&tail)?;
        out.push(IdentityInstance {
            name: "d_J phi ^ beta ^ omega_phi^k ^ omega^(n-k-1)",
            k,
            residual: lhs.sub(&omega_n.scale(&(c * sum_mixed))),
        });
    }
    Ok(out)
}

/// Verifies the three identities symbolically, with `phi_i`, `a_c`, `b_c`
/// as polynomial indeterminates, for every admissible `k`. A nonzero
/// residual polynomial is an error.
pub fn verify_wedge_identities(n: usize) -> Result<WedgeIdentityReport, ExteriorError> {
    if !(1..=3).contains(&n) {
        return Err(ExteriorError::UnsupportedDimension(n));
    }
    let phi: Vec<Poly> = (0..n)
        .map(|i| Poly::var(Var::real('p', i as u16 + 1)))
        .collect();
    let a: Vec<Poly> = (0..2 * n)
        .map(|c| Poly::var(Var::complex('a', c as u16 + 1)))
        .collect();
    let b: Vec<Poly> = (0..2 * n)
        .map(|c| Poly::var(Var::complex('b', c as u16 + 1)))
        .collect();
    let ratio = |p: i64, q: i64| Poly::constant(GaussianRational::ratio(p, q));
    let mut residuals = Vec::new();
    for inst in identity_residuals(n, &phi, &a, &b, ratio)? {
        let residual = if inst.residual.is_zero() {
            "0".to_string()
        } else {
            format!("{:?}", inst.residual)
        };
        if !inst.residual.is_zero() {
            return Err(ExteriorError::NonzeroResidual {
                identity: inst.name.to_string(),
                k: inst.k,
                residual,
            });
        }
        residuals.push(IdentityResidual {
            identity: inst.name.to_string(),
            k: inst.k,
            nonzero_terms: inst.residual.num_terms(),
            residual,
        });
    }
    Ok(WedgeIdentityReport {
        n,
        all_zero: residuals.iter().all(|r| r.nonzero_terms == 0),
        residuals,
    })
}
