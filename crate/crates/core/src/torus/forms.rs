use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{complex_derivative, ScalarField};
use super::grid::SpectralGrid;
use crate::exterior::{
    pairing_eigenvalues, ratio_to_omega_n, standard_omega, standard_omega_form, Form, Mask,
    TwoFormQ,
};
use crate::hypercomplex::{standard_frame, HypercomplexFrame};
use crate::linalg::pfaffian;
use crate::simdiag::{normalize_to_standard, simultaneous_diagonalize};

/// A `(p,q)`-form field: one complex sample vector per canonical monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct FormField {
    grid: SpectralGrid,
    p: usize,
    q: usize,
    terms: BTreeMap<Mask, Vec<Complex64>>,
}

impl FormField {
    pub fn zero(grid: &SpectralGrid, p: usize, q: usize) -> Self {
        Self {
            grid: grid.clone(),
            p,
            q,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        let mut out = Self::zero(f.grid(), 0, 0);
        out.terms.insert(0, f.to_complex());
        out
    }

    /// A form with the same constant coefficients at every point.
    pub fn constant(grid: &SpectralGrid, form: &Form<Complex64>) -> Self {
        let (p, q) = form.bidegree();
        let mut out = Self::zero(grid, p, q);
        for (m, c) in form.terms() {
            out.terms.insert(m, vec![*c; grid.len()]);
        }
        out
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coefficient(&self, mask: Mask) -> Option<&[Complex64]> {
        self.terms.get(&mask).map(|v| v.as_slice())
    }

    /// The form at one sample.
    pub fn at(&self, i: usize) -> Form<Complex64> {
        let n = self.grid.n();
        let mut f = Form::zero(n, self.p, self.q);
        for (m, v) in &self.terms {
            f = f.add(&Form::basis_monomial(n, *m, v[i]));
        }
        f
    }

    fn accumulate(&mut self, mask: Mask, values: &[Complex64], c: Complex64) {
        let entry = self
            .terms
            .entry(mask)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); values.len()]);
        for (e, v) in entry.iter_mut().zip(values) {
            *e += c * v;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.p, self.q), (other.p, other.q), "bidegree mismatch");
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.accumulate(*m, v, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Largest coefficient modulus over all monomials and samples.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Pointwise linear action of a covector map, given on basis monomials.
    fn pointwise_linear(
        &self,
        p: usize,
        q: usize,
        image: impl Fn(Mask) -> Form<Complex64>,
    ) -> Self {
        let mut out = Self::zero(&self.grid, p, q);
        for (m, v) in &self.terms {
            for (m2, c) in image(*m).terms() {
                out.accumulate(m2, v, *c);
            }
        }
        out
    }

    /// Left action of `J`; swaps the bidegree.
    pub fn j_action(&self) -> Self {
        let n = self.grid.n();
        self.pointwise_linear(self.q, self.p, |m| {
            Form::basis_monomial(n, m, Complex64::new(1.0, 0.0)).j_action()
        })
    }

    pub fn j_inverse(&self) -> Self {
        let n = self.grid.n();
        self.pointwise_linear(self.q, self.p, |m| {
            Form::basis_monomial(n, m, Complex64::new(1.0, 0.0)).j_inverse()
        })
    }

    /// `sum_c d/dz_c(coeff) dz_c ^ ...` (or the `dzbar` version).
    fn exterior_derivative(&self, holomorphic: bool) -> Self {
        let n = self.grid.n();
        let frame = standard_frame(n);
        let (p, q) = if holomorphic {
            (self.p + 1, self.q)
        } else {
            (self.p, self.q + 1)
        };
        let mut out = Self::zero(&self.grid, p, q);
        for (m, v) in &self.terms {
            // constant coefficients have exactly vanishing derivatives
            if v.iter().all(|x| *x == v[0]) {
                continue;
            }
            let partials: Vec<Option<Vec<Complex64>>> = (0..4 * n)
                .map(|k| {
                    self.grid
                        .axis_of(k)
                        .map(|_| complex_derivative(&self.grid, v, &[k]))
                })
                .collect();
            for c in 0..2 * n {
                let cov = if holomorphic {
                    Form::dz(n, c)
                } else {
                    Form::dzbar(n, c)
                };
                let prod = cov
                    .wedge(&Form::basis_monomial(n, *m, Complex64::new(1.0, 0.0)))
                    .expect("degree");
                let Some((m2, sign)) = prod.terms().next().map(|(a, b)| (a, *b)) else {
                    continue;
                };
                for (k, w) in frame.wirtinger(c) {
                    let w = if holomorphic { w } else { w.conj() };
                    if let Some(d) = &partials[k] {
                        out.accumulate(m2, d, sign * w);
                    }
                }
            }
        }
        out
    }

    pub fn del(&self) -> Self {
        self.exterior_derivative(true)
    }

    pub fn del_bar(&self) -> Self {
        self.exterior_derivative(false)
    }

    /// `J^{-1} del_bar J`.
    pub fn del_j(&self) -> Self {
        self.j_action().del_bar().j_inverse()
    }
}

/// `del f` as a `(1,0)`-form field.
pub fn del(f: &ScalarField) -> FormField {
    FormField::from_scalar(f).del()
}

pub fn del_bar(f: &ScalarField) -> FormField {
    FormField::from_scalar(f).del_bar()
}

/// `del_J f = J^{-1}(del_bar f)` for a function.
pub fn del_j(f: &ScalarField) -> FormField {
    FormField::from_scalar(f).del_j()
}

/// `(2,0)`-forms sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormField {
    grid: SpectralGrid,
    forms: Vec<TwoFormQ>,
}

impl TwoFormField {
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &TwoFormQ {
        &self.forms[i]
    }

    pub fn forms(&self) -> &[TwoFormQ] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn add_constant(&self, c: &TwoFormQ) -> Self {
        Self {
            grid: self.grid.clone(),
            forms: self.forms.iter().map(|f| f.add(c)).collect(),
        }
    }

    pub fn to_form_field(&self) -> FormField {
        let n = self.grid.n();
        let mut out = FormField::zero(&self.grid, 2, 0);
        let d = 2 * n;
        for i in 0..d {
            for j in i + 1..d {
                let v: Vec<Complex64> = self.forms.iter().map(|f| f.matrix()[(i, j)]).collect();
                out.terms.insert((1 << i) | (1 << j), v);
            }
        }
        out
    }

    pub fn max_q_real_residual(&self) -> f64 {
        self.forms
            .par_iter()
            .map(|f| f.q_real_residual())
            .reduce(|| 0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian pairing over all samples.
    pub fn min_pairing_eigenvalue(&self) -> f64 {
        let frame = standard_frame(self.grid.n());
        self.forms
            .par_iter()
            .map(|f| pairing_eigenvalues(&frame, f)[0])
            .reduce(|| f64::INFINITY, f64::min)
    }
}

/// Second real derivatives `d^2 phi / dx_k dx_l` for active `k <= l`.
fn real_hessian(phi: &ScalarField) -> BTreeMap<(usize, usize), Vec<f64>> {
    let grid = phi.grid();
    let spec = phi.spectrum();
    let active = grid.active().to_vec();
    let mut out = BTreeMap::new();
    for (a, &k) in active.iter().enumerate() {
        for &l in &active[a..] {
            let d = super::field::spectral_derivative(grid, &spec, &[k, l]);
            out.insert((k, l), d.into_iter().map(|c| c.re).collect());
        }
    }
    out
}

/// `H_ij = d^2 phi / dz_i dzbar_j` at every sample.
pub fn complex_hessian(phi: &ScalarField) -> Vec<DMatrix<Complex64>> {
    let grid = phi.grid();
    let n = grid.n();
    let frame = standard_frame(n);
    let d = 2 * n;
    let hess = real_hessian(phi);
    let rows: Vec<Vec<(usize, Complex64)>> = (0..d).map(|c| frame.wirtinger(c)).collect();
    // weight of each stored real second derivative in each H_ij
    let mut weights: Vec<((usize, usize), Vec<Complex64>)> = Vec::new();
    for &(k, l) in hess.keys() {
        let mut w = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for &(a, wa) in &rows[i] {
                    for &(b, wb) in &rows[j] {
                        if (a.min(b), a.max(b)) == (k, l) {
                            s += wa * wb.conj();
                        }
                    }
                }
                w[i * d + j] = s;
            }
        }
        weights.push(((k, l), w));
    }
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let mut h = DMatrix::zeros(d, d);
            for (key, w) in &weights {
                let v = hess[key][p];
                if v == 0.0 {
                    continue;
                }
                for i in 0..d {
                    for j in 0..d {
                        h[(i, j)] += w[i * d + j] * v;
                    }
                }
            }
            h
        })
        .collect()
}

/// Coefficient matrix of `del del_J phi` from the complex Hessian:
/// `-(H S + S conj(H))` with `S` the block matrix of `J`.
pub fn two_form_of_hessian(frame: &HypercomplexFrame, h: &DMatrix<Complex64>) -> TwoFormQ {
    let s = frame.j_block().map(|x| Complex64::new(x, 0.0));
    let a = -(h * &s + &s * h.map(|x| x.conj()));
    TwoFormQ::from_any(&a)
}

/// `del del_J phi` at every sample.
pub fn del_del_j(phi: &ScalarField) -> TwoFormField {
    let frame = standard_frame(phi.grid().n());
    let forms = complex_hessian(phi)
        .par_iter()
        .map(|h| two_form_of_hessian(&frame, h))
        .collect();
    TwoFormField {
        grid: phi.grid().clone(),
        forms,
    }
}

/// `Omega_phi = Omega + del del_J phi`.
pub fn omega_phi(phi: &ScalarField) -> TwoFormField {
    let omega = standard_omega(&standard_frame(phi.grid().n()));
    del_del_j(phi).add_constant(&omega)
}

/// `Omega_phi^n / Omega^n` of one form, as the Pfaffian of its matrix.
pub fn density_of(form: &TwoFormQ) -> f64 {
    let a = form.matrix();
    match form.n() {
        1 => a[(0, 1)].re,
        2 => (a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)]).re,
        _ => pfaffian(a).re,
    }
}

/// Monge-Ampere density `Omega_phi^n / Omega^n`.
pub fn ma_density(phi: &ScalarField) -> ScalarField {
    let op = omega_phi(phi);
    let values = op.forms.par_iter().map(density_of).collect();
    ScalarField::from_parts(phi.grid().clone(), values)
}

/// Density from the wedge power `Omega_phi^n` in the exterior algebra.
pub fn ma_density_exterior(phi: &ScalarField) -> ScalarField {
    let n = phi.grid().n();
    let op = omega_phi(phi);
    let values = op
        .forms
        .par_iter()
        .map(|f| ratio_to_omega_n(&f.to_form().power(n).expect("degree")).re)
        .collect();
    ScalarField::from_parts(phi.grid().clone(), values)
}

/// Density as the product of relative eigenvalues from simultaneous
/// diagonalization against `Omega`.
pub fn ma_density_eigen(phi: &ScalarField) -> ScalarField {
    let frame = standard_frame(phi.grid().n());
    let omega = standard_omega(&frame);
    let op = omega_phi(phi);
    let values = op
        .forms
        .par_iter()
        .map(|f| {
            let r =
                simultaneous_diagonalize(&frame, &omega, f).expect("reference form is positive");
            normalize_to_standard(&r, &omega, f).phis.iter().product()
        })
        .collect();
    ScalarField::from_parts(phi.grid().clone(), values)
}

/// Relative eigenvalues `phi_i` of `Omega_phi` at every sample, via simdiag.
pub fn relative_eigenvalues(field: &TwoFormField) -> Vec<Vec<f64>> {
    let frame = standard_frame(field.grid.n());
    let omega = standard_omega(&frame);
    field
        .forms
        .par_iter()
        .map(|f| match simultaneous_diagonalize(&frame, &omega, f) {
            Ok(r) => normalize_to_standard(&r, &omega, f).phis,
            Err(_) => vec![f64::NAN; frame.n()],
        })
        .collect()
}

/// Linear functional `alpha -> (alpha ^ Omega^{n-1}) / Omega^n` on `(2,0)`-forms,
/// as weights on the upper-triangular coefficients.
pub fn trace_weights(n: usize) -> Vec<((usize, usize), f64)> {
    let tail: Form<Complex64> = standard_omega_form::<Complex64>(n)
        .power(n - 1)
        .expect("degree");
    let mut out = Vec::new();
    for i in 0..2 * n {
        for j in i + 1..2 * n {
            let mono = Form::basis_monomial(n, (1 << i) | (1 << j), Complex64::new(1.0, 0.0));
            let w = ratio_to_omega_n(&mono.wedge(&tail).expect("degree"));
            if w.norm() > 0.0 {
                out.push(((i, j), w.re));
            }
        }
    }
    out
}

/// `(a ^ b ^ Omega^{n-1}) / Omega^n` for `(1,0)`-covectors `a`, `b`.
pub fn wedge_pair_ratio(
    weights: &[((usize, usize), f64)],
    a: &[Complex64],
    b: &[Complex64],
) -> Complex64 {
    weights
        .iter()
        .map(|&((i, j), w)| (a[i] * b[j] - a[j] * b[i]) * w)
        .sum()
}

/// `(1,0)`-components of `del u` and `del_J u` at every sample.
pub fn del_and_del_j_components(u: &ScalarField) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let n = u.grid().n();
    let d = del(u);
    let dj = del_j(u);
    let len = u.grid().len();
    let comps = |f: &FormField| -> Vec<Vec<Complex64>> {
        (0..len)
            .map(|p| {
                (0..2 * n)
                    .map(|c| {
                        f.coefficient(1 << c)
                            .map_or(Complex64::new(0.0, 0.0), |v| v[p])
                    })
                    .collect()
            })
            .collect()
    };
    (comps(&d), comps(&dj))
}

/// `n * integral (del u ^ del_J u ^ Omega^{n-1}) / Omega^n` against the volume
/// element, i.e. the wedge form of the gradient energy.
pub fn gradient_energy(u: &ScalarField) -> f64 {
    let n = u.grid().n();
    let weights = trace_weights(n);
    let (a, b) = del_and_del_j_components(u);
    let values: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| n as f64 * wedge_pair_ratio(&weights, x, y).re)
        .collect();
    ScalarField::from_parts(u.grid().clone(), values).integrate()
}

/// `integral sum_c |du/dz_c|^2`, the same energy in coordinates.
pub fn gradient_energy_coordinate(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let frame = standard_frame(grid.n());
    let partials: Vec<Option<ScalarField>> = (0..4 * grid.n())
        .map(|k| grid.axis_of(k).map(|_| u.derivative(&[k])))
        .collect();
    let mut total = vec![0.0; grid.len()];
    for c in 0..2 * grid.n() {
        for (p, t) in total.iter_mut().enumerate() {
            let mut z = Complex64::new(0.0, 0.0);
            for (k, w) in frame.wirtinger(c) {
                if let Some(f) = &partials[k] {
                    z += w * f.values()[p];
                }
            }
            *t += z.norm_sqr();
        }
    }
    ScalarField::from_parts(grid.clone(), total).integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{is_q_positive, GaussianRational};
    use crate::torus::band_limited;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn derivatives_of_constants_vanish() {
        let g = SpectralGrid::new(1, &[0, 1, 2, 3], 4).unwrap();
        let c = ScalarField::constant(&g, 2.5);
        assert_eq!(del(&c).max_abs(), 0.0);
        assert_eq!(del_j(&c).max_abs(), 0.0);
        assert!(del_del_j(&c).forms().iter().all(|f| f.frobenius() == 0.0));
    }

    #[test]
    fn del_of_single_harmonic() {
        // f = sin(2 pi x_0): df/dz_0 = pi cos(2 pi x_0), df/dzbar_0 = the same.
        let g = SpectralGrid::new(1, &[0, 1], 8).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let d = del(&f);
        let db = del_bar(&f);
        for p in 0..g.len() {
            let x = g.coordinates(p);
            let exact = PI * (2.0 * PI * x[0]).cos();
            assert!((d.coefficient(1).unwrap()[p] - exact).norm() < 1e-13);
            assert!((db.coefficient(1 << 2).unwrap()[p] - exact).norm() < 1e-13);
        }
        // f = sin(2 pi x_1): df/dz_0 = -i pi cos(2 pi x_1)
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[1]).sin());
        let d = del(&f);
        let p = 3;
        let x = g.coordinates(p);
        let exact = Complex64::new(0.0, -PI * (2.0 * PI * x[1]).cos());
        assert!((d.coefficient(1).unwrap()[p] - exact).norm() < 1e-13);
    }

    #[test]
    fn del_bar_is_conjugate_of_del() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = SpectralGrid::new(2, &[0, 3, 6], 8).unwrap();
        let f = band_limited(&g, &mut rng, 6, 3, 1.0);
        let d = del(&f);
        let db = del_bar(&f);
        let n = g.n();
        for c in 0..2 * n {
            let a = d.coefficient(1 << c);
            let b = db.coefficient(1 << (2 * n + c));
            match (a, b) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x.conj() - y).norm() < 1e-13);
                    }
                }
                (None, None) => {}
                _ => panic!("type mismatch at {c}"),
            }
        }
    }

    #[test]
    fn del_j_of_harmonic() {
        // del_J f = f_{zbar_0} dz_1 - f_{zbar_1} dz_0
        let g = SpectralGrid::new(1, &[0, 2], 8).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() + (2.0 * PI * x[2]).cos());
        let dj = del_j(&f);
        for p in 0..g.len() {
            let x = g.coordinates(p);
            let f0bar = PI * (2.0 * PI * x[0]).cos();
            let f1bar = -PI * (2.0 * PI * x[2]).sin();
            assert!((dj.coefficient(0b10).unwrap()[p] - f0bar).norm() < 1e-13);
            assert!((dj.coefficient(0b01).unwrap()[p] + f1bar).norm() < 1e-13);
        }
    }

    #[test]
    fn anticommutation_and_q_reality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, active, pts) in [
            (1usize, vec![0, 1, 2, 3], 6usize),
            (2, vec![0, 2, 5, 7], 6),
            (2, vec![0, 4], 16),
        ] {
            let g = SpectralGrid::new(n, &active, pts).unwrap();
            let f = band_limited(&g, &mut rng, 8, 2, 1.0);
            let lhs = FormField::from_scalar(&f).del_j().del();
            let rhs = FormField::from_scalar(&f).del().del_j();
            let scale = lhs.max_abs().max(1.0);
            assert!(lhs.add(&rhs).max_abs() <= 1e-11 * scale);
            let fast = del_del_j(&f);
            let slow = lhs;
            let diff = fast.to_form_field();
            let mut worst: f64 = 0.0;
            for (m, v) in &slow.terms {
                let w = diff.coefficient(*m).unwrap();
                for (a, b) in v.iter().zip(w) {
                    worst = worst.max((a - b).norm());
                }
            }
            assert!(worst <= 1e-11 * scale, "fast path disagrees by {worst}");
            assert!(fast.max_q_real_residual() <= 1e-12 * scale);
        }
    }

    #[test]
    fn flat_torus_has_no_torsion_term() {
        let g = SpectralGrid::new(2, &[0, 4], 8).unwrap();
        let omega_bar_n = standard_omega_form::<Complex64>(2).conj().power(2).unwrap();
        let field = FormField::constant(&g, &omega_bar_n);
        assert_eq!(field.del().max_abs(), 0.0);
        let exact = standard_omega_form::<GaussianRational>(2)
            .conj()
            .power(2)
            .unwrap();
        assert!(exact.num_terms() > 0);
    }

    #[test]
    fn quadratic_hessian_gives_scaled_omega() {
        // phi = c |q|^2 has constant complex Hessian c I, so Omega_phi = (1 + 2c) Omega.
        let frame = standard_frame(1);
        for c in [0.1, 0.5, 2.0] {
            let h = DMatrix::identity(2, 2)
                .scale(c)
                .map(|x: f64| Complex64::new(x, 0.0));
            let b = two_form_of_hessian(&frame, &h);
            let op = b.add(&standard_omega(&frame));
            assert!((op.matrix()[(0, 1)].re - (1.0 + 2.0 * c)).abs() < 1e-15);
            assert!(is_q_positive(&frame, &op).unwrap());
        }
        // periodic check: cos on every coordinate approximates |q|^2 near 0
        let g = SpectralGrid::full(1, 8).unwrap();
        let phi = ScalarField::from_fn(&g, |x| {
            x.iter()
                .map(|t| -(2.0 * PI * t).cos() / (4.0 * PI * PI))
                .sum()
        });
        let b = del_del_j(&phi);
        // at the origin every d^2/dx^2 equals 1: H = I/2, Omega_phi = 2 Omega
        let a = b.at(0).matrix();
        assert!((a[(0, 1)].re - 1.0).abs() < 1e-13);
        assert!(a[(0, 1)].im.abs() < 1e-13);
    }

    #[test]
    fn density_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = SpectralGrid::new(2, &[0, 4], 16).unwrap();
        let phi = band_limited(&g, &mut rng, 5, 2, 0.005);
        let a = ma_density(&phi);
        let b = ma_density_exterior(&phi);
        let c = ma_density_eigen(&phi);
        assert!(a.sub(&b).sup_norm() < 1e-10);
        assert!(a.sub(&c).sup_norm() < 1e-10);
        assert!(
            (ma_density(&ScalarField::zeros(&g)).sub(&ScalarField::constant(&g, 1.0))).sup_norm()
                == 0.0
        );
    }

    #[test]
    fn n1_density_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = SpectralGrid::new(1, &[0, 1, 3], 8).unwrap();
        let phi = band_limited(&g, &mut rng, 5, 2, 0.01);
        let rho = ma_density(&phi);
        let expected = phi.laplacian().scale(0.25).shift(1.0);
        assert!(rho.sub(&expected).sup_norm() < 1e-12);
    }

    #[test]
    fn n2_single_block_is_affine() {
        // active set inside one quaternionic block: density is affine in phi
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = SpectralGrid::new(2, &[0, 1], 16).unwrap();
        let phi = band_limited(&g, &mut rng, 5, 2, 0.01);
        let rho = ma_density(&phi);
        let expected = phi.laplacian().scale(0.25).shift(1.0);
        assert!(rho.sub(&expected).sup_norm() < 1e-12);
        // two blocks: genuinely nonlinear, det(I + D^2 phi / 4)
        let g = SpectralGrid::new(2, &[0, 4], 16).unwrap();
        let phi = band_limited(&g, &mut rng, 5, 2, 0.01);
        let rho = ma_density(&phi);
        let (xx, yy, xy) = (
            phi.derivative(&[0, 0]),
            phi.derivative(&[4, 4]),
            phi.derivative(&[0, 4]),
        );
        for p in 0..g.len() {
            let (a, b, c) = (
                xx.values()[p] / 4.0,
                yy.values()[p] / 4.0,
                xy.values()[p] / 4.0,
            );
            assert!((rho.values()[p] - ((1.0 + a) * (1.0 + b) - c * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_energy_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (n, active) in [(1usize, vec![0, 1, 2]), (2, vec![0, 4]), (2, vec![1, 2, 7])] {
            let g = SpectralGrid::new(n, &active, 8).unwrap();
            let u = band_limited(&g, &mut rng, 6, 3, 1.0);
            let w = gradient_energy(&u);
            let c = gradient_energy_coordinate(&u);
            assert!((w - c).abs() <= 1e-9 * c.abs());
        }
        let g = SpectralGrid::new(1, &[0], 8).unwrap();
        assert_eq!(gradient_energy(&ScalarField::constant(&g, 1.0)), 0.0);
        // single harmonic: |du/dz_0|^2 = pi^2 cos^2, mean pi^2/2, volume 4
        let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        assert!((gradient_energy(&u) - 2.0 * PI * PI).abs() < 1e-11);
    }

    #[test]
    fn discrete_stokes_for_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = SpectralGrid::new(2, &[0, 2, 4], 8).unwrap();
        let psi = band_limited(&g, &mut rng, 6, 3, 1.0);
        let weights = trace_weights(2);
        let b = del_del_j(&psi);
        let vals: Vec<f64> = b
            .forms()
            .iter()
            .map(|f| {
                weights
                    .iter()
                    .map(|&((i, j), w)| f.matrix()[(i, j)].re * w)
                    .sum()
            })
            .collect();
        let total = ScalarField::new(g.clone(), vals).unwrap();
        let scale = b.forms().iter().map(|f| f.frobenius()).fold(0.0, f64::max);
        assert!(total.integrate().abs() <= 1e-10 * scale);
    }
}
