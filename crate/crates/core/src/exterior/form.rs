use std::collections::BTreeMap;
use std::fmt;

use super::scalar::Scalar;
use super::ExteriorError;

/// Bitmask over the `4n` complex covectors: bit `c < 2n` is `dz_c`, bit
/// `2n + c` is `dzbar_c`. Set bits are read in increasing order.
pub type Mask = u32;

/// Sign of `dx_a ^ dx_b` reordered into increasing order, for disjoint masks.
pub(crate) fn wedge_sign(a: Mask, b: Mask) -> i32 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        rest &= rest - 1;
        inversions += (a >> (y + 1)).count_ones();
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn bits(mask: Mask) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(b)
        }
    })
}

fn permutation_sign(seq: &[usize]) -> i32 {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Image of a single covector under the left action of `J`:
/// `J dz_{2a} = -dzbar_{2a+1}`, `J dz_{2a+1} = dzbar_{2a}` and the
/// conjugate relations.
pub(crate) fn j_on_covector(n: usize, c: usize) -> (i32, usize) {
    let half = 2 * n;
    let (holo, i) = if c < half {
        (true, c)
    } else {
        (false, c - half)
    };
    let (sign, partner) = if i % 2 == 0 { (-1, i + 1) } else { (1, i - 1) };
    if holo {
        (sign, half + partner)
    } else {
        (sign, partner)
    }
}

/// A differential form of pure type `(p, q)` with respect to `I` on a space
/// of quaternionic dimension `n`, stored sparsely by increasing multi-index.
#[derive(Clone, PartialEq)]
pub struct Form<S: Scalar> {
    n: usize,
    p: usize,
    q: usize,
    terms: BTreeMap<Mask, S>,
}

impl<S: Scalar> Form<S> {
    pub fn zero(n: usize, p: usize, q: usize) -> Self {
        assert!(
            (1..=8).contains(&n),
            "quaternionic dimension {n} outside 1..=8"
        );
        Self {
            n,
            p,
            q,
            terms: BTreeMap::new(),
        }
    }

    /// The constant function `c` as a `(0,0)`-form.
    pub fn constant(n: usize, c: S) -> Self {
        let mut f = Self::zero(n, 0, 0);
        f.add_term(0, c);
        f
    }

    /// `c * dz_{i_1} ^ ... ^ dzbar_{j_1} ^ ...` given in any order; the
    /// coefficient is reordered with the appropriate sign.
    pub fn monomial(n: usize, holo: &[usize], anti: &[usize], c: S) -> Self {
        let mut seq: Vec<usize> = holo.to_vec();
        seq.extend(anti.iter().map(|a| 2 * n + a));
        let mut mask: Mask = 0;
        for &s in &seq {
            assert!(s < 4 * n, "covector index out of range");
            if mask & (1 << s) != 0 {
                return Self::zero(n, holo.len(), anti.len());
            }
            mask |= 1 << s;
        }
        let sign = permutation_sign(&seq);
        let mut f = Self::zero(n, holo.len(), anti.len());
        f.add_term(mask, if sign > 0 { c } else { -c });
        f
    }

    /// `dz_c` (holomorphic) as a `(1,0)`-form.
    pub fn dz(n: usize, c: usize) -> Self {
        Self::monomial(n, &[c], &[], S::one())
    }

    /// `dzbar_c` as a `(0,1)`-form.
    pub fn dzbar(n: usize, c: usize) -> Self {
        Self::monomial(n, &[], &[c], S::one())
    }

    /// The canonical monomial `mask` with coefficient `c`.
    pub fn basis_monomial(n: usize, mask: Mask, c: S) -> Self {
        assert!(
            u64::from(mask) < 1u64 << (4 * n),
            "mask outside the covector range"
        );
        let low: Mask = (1 << (2 * n)) - 1;
        let mut f = Self::zero(
            n,
            (mask & low).count_ones() as usize,
            (mask >> (2 * n)).count_ones() as usize,
        );
        f.add_term(mask, c);
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Mask, &S)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the canonical monomial `mask`.
    pub fn coefficient(&self, mask: Mask) -> S {
        self.terms.get(&mask).cloned().unwrap_or_else(S::zero)
    }

    pub(crate) fn add_term(&mut self, mask: Mask, c: S) {
        debug_assert_eq!(self.bidegree_of(mask), (self.p, self.q));
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mask) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn bidegree_of(&self, mask: Mask) -> (usize, usize) {
        let low: Mask = (1 << (2 * self.n)) - 1;
        (
            (mask & low).count_ones() as usize,
            (mask >> (2 * self.n)).count_ones() as usize,
        )
    }

    fn check_same_type(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.n != other.n {
            return Err(ExteriorError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        if (self.p, self.q) != (other.p, other.q) {
            return Err(ExteriorError::BidegreeMismatch {
                left: (self.p, self.q),
                right: (other.p, other.q),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_same_type(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.try_add(&other.scale(&-S::one()))
    }

    /// Sum of forms of identical type.
    ///
    /// # Panics
    /// On a dimension or bidegree mismatch.
    pub fn add(&self, other: &Self) -> Self {
        self.try_add(other).expect("adding forms of different type")
    }

    /// # Panics
    /// On a dimension or bidegree mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        self.try_sub(other)
            .expect("subtracting forms of different type")
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero(self.n, self.p, self.q);
        for (m, v) in &self.terms {
            out.add_term(*m, v.clone() * c.clone());
        }
        out
    }

    /// Graded-commutative exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        if self.n != other.n {
            return Err(ExteriorError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let degree = self.degree() + other.degree();
        if degree > 4 * self.n {
            return Err(ExteriorError::DegreeOverflow {
                degree,
                max: 4 * self.n,
            });
        }
        let mut out = Self::zero(self.n, self.p + other.p, self.q + other.q);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let prod = ca.clone() * cb.clone();
                let prod = if wedge_sign(*ma, *mb) > 0 {
                    prod
                } else {
                    -prod
                };
                out.add_term(ma | mb, prod);
            }
        }
        Ok(out)
    }

    /// `self ^ self ^ ... ^ self` (`k` factors); `k = 0` gives the constant 1.
    pub fn power(&self, k: usize) -> Result<Self, ExteriorError> {
        let mut acc = Self::constant(self.n, S::one());
        for _ in 0..k {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    /// Complex conjugate; maps type `(p,q)` to `(q,p)`.
    pub fn conj(&self) -> Self {
        let half = 2 * self.n;
        let low: Mask = (1 << half) - 1;
        let mut out = Self::zero(self.n, self.q, self.p);
        for (m, c) in &self.terms {
            let holo = m & low;
            let anti = m >> half;
            // conj(dz_H ^ dzbar_A) = dzbar_H ^ dz_A = sign * dz_A ^ dzbar_H
            let sign = if (holo.count_ones() * anti.count_ones()).is_multiple_of(2) {
                1
            } else {
                -1
            };
            let v = c.conj();
            out.add_term(anti | (holo << half), if sign > 0 { v } else { -v });
        }
        out
    }

    /// Left action `alpha -> alpha(. J, ..., . J)`; complex linear, maps
    /// type `(p,q)` to `(q,p)`.
    pub fn j_action(&self) -> Self {
        let mut out = Self::zero(self.n, self.q, self.p);
        for (m, c) in &self.terms {
            let mut sign = 1;
            let mut seq = Vec::with_capacity(m.count_ones() as usize);
            for b in bits(*m) {
                let (s, image) = j_on_covector(self.n, b);
                sign *= s;
                seq.push(image);
            }
            sign *= permutation_sign(&seq);
            let mask = seq.iter().fold(0, |acc, b| acc | (1 << b));
            out.add_term(mask, if sign > 0 { c.clone() } else { -c.clone() });
        }
        out
    }

    /// `J^{-1}`; on a `k`-form this is `(-1)^k J`.
    pub fn j_inverse(&self) -> Self {
        let j = self.j_action();
        if self.degree().is_multiple_of(2) {
            j
        } else {
            j.scale(&-S::one())
        }
    }

    /// Mask of `dz_0 ^ ... ^ dz_{2n-1}`.
    pub fn top_holomorphic_mask(n: usize) -> Mask {
        (1 << (2 * n)) - 1
    }
}

impl<S: Scalar> fmt::Debug for Form<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Form(n={}, ({},{}))[", self.n, self.p, self.q)?;
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}:", c)?;
            for b in bits(*m) {
                if b < 2 * self.n {
                    write!(f, " dz{}", b + 1)?;
                } else {
                    write!(f, " dzb{}", b - 2 * self.n + 1)?;
                }
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::scalar::GaussianRational as G;
    use proptest::prelude::*;

    fn omega(n: usize) -> Form<G> {
        let mut f = Form::zero(n, 2, 0);
        for a in 0..n {
            f = f.add(&Form::monomial(n, &[2 * a, 2 * a + 1], &[], G::one()));
        }
        f
    }

    #[test]
    fn antisymmetry_of_monomials() {
        let a = Form::<G>::monomial(2, &[0, 1], &[], G::one());
        let b = Form::<G>::monomial(2, &[1, 0], &[], G::one());
        assert_eq!(a, b.scale(&G::from_i64(-1)));
        assert!(Form::<G>::monomial(2, &[1, 1], &[], G::one()).is_zero());
        let dz1 = Form::<G>::dz(2, 0);
        let dz2 = Form::<G>::dz(2, 1);
        assert_eq!(
            dz1.wedge(&dz2).unwrap(),
            dz2.wedge(&dz1).unwrap().scale(&G::from_i64(-1))
        );
    }

    #[test]
    fn omega_squared_by_term_enumeration() {
        // (dz1^dz2 + dz3^dz4)^2 = dz1dz2dz3dz4 + dz3dz4dz1dz2 = 2 dz1dz2dz3dz4
        let sq = omega(2).wedge(&omega(2)).unwrap();
        assert_eq!(sq, Form::monomial(2, &[0, 1, 2, 3], &[], G::from_i64(2)));
        let zero = Form::<G>::zero(2, 1, 1);
        assert!(omega(2).wedge(&zero).unwrap().is_zero());
    }

    #[test]
    fn degree_overflow_is_an_error() {
        let top = Form::<G>::monomial(1, &[0, 1], &[0, 1], G::one());
        let e = top.wedge(&Form::dz(1, 0)).unwrap_err();
        assert!(matches!(
            e,
            ExteriorError::DegreeOverflow { degree: 5, max: 4 }
        ));
    }

    #[test]
    fn j_of_omega_is_conjugate_omega() {
        for n in 1..=3 {
            let w = omega(n);
            assert_eq!(w.j_action(), w.conj());
        }
    }

    #[test]
    fn j_squared_sign() {
        let n = 2;
        let a = Form::<G>::monomial(n, &[0], &[3], G::from_ints(2, -1)).add(&Form::monomial(
            n,
            &[2],
            &[1],
            G::from_ints(0, 5),
        ));
        assert_eq!(a.j_action().j_action(), a);
        let b = Form::<G>::monomial(n, &[0, 3], &[], G::from_ints(1, 1));
        assert_eq!(b.j_action().j_action(), b);
        let c = Form::<G>::dz(n, 2).scale(&G::from_ints(3, 4));
        assert_eq!(c.j_action().j_action(), c.scale(&G::from_i64(-1)));
        assert_eq!(c.j_inverse().j_action(), c);
    }

    fn arb_coeff() -> impl Strategy<Value = G> {
        (-5i64..=5, -5i64..=5).prop_map(|(a, b)| G::from_ints(a, b))
    }

    fn arb_form(n: usize, p: usize, q: usize) -> impl Strategy<Value = Form<G>> {
        proptest::collection::vec(
            (
                proptest::sample::subsequence((0..2 * n).collect::<Vec<_>>(), p),
                proptest::sample::subsequence((0..2 * n).collect::<Vec<_>>(), q),
                arb_coeff(),
            ),
            0..5,
        )
        .prop_map(move |terms| {
            terms
                .into_iter()
                .fold(Form::zero(n, p, q), |acc, (h, a, c)| {
                    acc.add(&Form::monomial(n, &h, &a, c))
                })
        })
    }

    proptest! {
        #[test]
        fn graded_commutativity(a in arb_form(2, 1, 1), b in arb_form(2, 1, 0)) {
            let ab = a.wedge(&b).unwrap();
            let ba = b.wedge(&a).unwrap();
            let sign = if (a.degree() * b.degree()) % 2 == 0 { 1 } else { -1 };
            prop_assert_eq!(ab, ba.scale(&G::from_i64(sign)));
        }

        #[test]
        fn j_is_multiplicative(a in arb_form(2, 1, 1), b in arb_form(2, 2, 0)) {
            let lhs = a.wedge(&b).unwrap().j_action();
            let rhs = a.j_action().wedge(&b.j_action()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn j_squared_is_graded_sign(a in arb_form(3, 2, 1), c in arb_coeff()) {
            prop_assert_eq!(a.j_action().j_action(), a.scale(&G::from_i64(-1)));
            prop_assert_eq!(a.scale(&c).j_action(), a.j_action().scale(&c));
        }

        #[test]
        fn j_commutes_with_conjugation(a in arb_form(2, 2, 1)) {
            prop_assert_eq!(a.conj().j_action(), a.j_action().conj());
            prop_assert_eq!(a.conj().conj(), a);
        }
    }
}
