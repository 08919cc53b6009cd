use hkt::estimates::{holder_excess, next_eps, shift_discrepancy, LevelState};
use hkt::exterior::{pairing_eigenvalues, Form, TwoFormQ};
use hkt::hypercomplex::{standard_frame, Quaternion};
use hkt::simdiag::sampling::{random_q_positive, random_q_real, random_vector};
use hkt::simdiag::{conj_equivariance_residual, simultaneous_diagonalize};
use hkt::solver::{solve, SolveConfig};
use hkt::torus::{band_limited, ma_density, Harmonic, HarmonicSum, SpectralGrid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-10.0f64..10.0).prop_map(Quaternion::from_array)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Random `(p, q)`-form on `n = 2` as a sum of a few monomials.
fn form(p: usize, q: usize) -> impl Strategy<Value = Form<Complex64>> {
    let idx = prop::sample::subsequence((0..4).collect::<Vec<usize>>(), p);
    let anti = prop::sample::subsequence((0..4).collect::<Vec<usize>>(), q);
    prop::collection::vec((idx, anti, complex()), 1..4).prop_map(move |terms| {
        terms
            .into_iter()
            .fold(Form::zero(2, p, q), |acc, (h, a, c)| {
                acc.add(&Form::monomial(2, &h, &a, c))
            })
    })
}

fn max_abs_diff(a: &Form<Complex64>, b: &Form<Complex64>) -> f64 {
    a.sub(b).terms().map(|(_, c)| c.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quaternion_product_is_associative_and_multiplicative(a in quaternion(), b in quaternion(), c in quaternion()) {
        let left = (a * b) * c;
        let right = a * (b * c);
        let scale = a.norm() * b.norm() * c.norm() + 1.0;
        for (x, y) in left.to_array().iter().zip(right.to_array()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
        prop_assert!(((a * b).norm() - a.norm() * b.norm()).abs() <= 1e-12 * (a.norm() * b.norm() + 1.0));
    }

    #[test]
    fn j_action_respects_wedge(a in form(1, 0), b in form(1, 1)) {
        let lhs = a.wedge(&b).unwrap().j_action();
        let rhs = a.j_action().wedge(&b.j_action()).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn q_real_forms_form_a_real_subspace(seed in any::<u64>(), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=3 {
            let a = random_q_real(&mut rng, n);
            let b = random_q_real(&mut rng, n);
            let c = a.scale(Complex64::new(s, 0.0)).add(&b.scale(Complex64::new(t, 0.0)));
            prop_assert!(c.q_real_residual() <= 1e-12 * (c.frobenius() + 1.0));
        }
    }

    #[test]
    fn pairing_of_q_real_form_is_hermitian(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=3 {
            let frame = standard_frame(n);
            let a: TwoFormQ = random_q_real(&mut rng, n);
            let m = a.pairing_matrix(&frame);
            prop_assert!((&m - m.adjoint()).norm() <= 1e-12 * (m.norm() + 1.0));
        }
    }

    #[test]
    fn simultaneous_basis_is_orthogonal_and_equivariant(seed in any::<u64>(), margin in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=3 {
            let frame = standard_frame(n);
            let o1 = random_q_positive(&mut rng, &frame, margin);
            let o2 = random_q_real(&mut rng, n);
            let r = simultaneous_diagonalize(&frame, &o1, &o2).unwrap();
            prop_assert!(r.residual <= 1e-10, "orthogonality {}", r.residual);
            let v = random_vector(&mut rng, 2 * n);
            let scale = v.norm() * (o1.frobenius() + o2.frobenius() + 1.0);
            prop_assert!(conj_equivariance_residual(&frame, &o1, &o2, &v).unwrap() <= 1e-11 * scale);
        }
    }

    #[test]
    fn q_positive_pairs_have_real_nonnegative_eigenvalues(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=3 {
            let frame = standard_frame(n);
            let o1 = random_q_positive(&mut rng, &frame, 0.5);
            let o2 = random_q_positive(&mut rng, &frame, 0.0);
            prop_assert!(pairing_eigenvalues(&frame, &o2).iter().all(|&l| l >= -1e-10));
            let r = simultaneous_diagonalize(&frame, &o1, &o2).unwrap();
            for l in &r.eigenvalues {
                prop_assert!(l.im.abs() <= 1e-9 && l.re >= -1e-9, "{l}");
            }
        }
    }

    #[test]
    fn eps_schedule_is_bounded(constant in 0.0f64..1e3, eps in 1e-6f64..1.0, level in 1usize..6) {
        let s = LevelState { level, eps, p_threshold: 0.0, constant };
        let next = next_eps(&s);
        prop_assert!(next <= eps && next <= 1.0 && next > 0.0);
        if constant > 0.0 {
            prop_assert!(next <= 1.0 / (constant * 2f64.powi(level as i32 + 2)) * (1.0 + 1e-15));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_derivative_is_exact_below_nyquist(freq in 1i32..7, phase in 0.0f64..2.0 * PI, axis in 0usize..2) {
        let grid = SpectralGrid::new(2, &[0, 4], 16).unwrap();
        let coord = [0, 4][axis];
        let h = HarmonicSum::new(vec![Harmonic { coord, frequency: freq, amplitude: 1.0, phase }]);
        let d = h.sample(&grid).derivative(&[coord]);
        let w = 2.0 * PI * freq as f64;
        let exact = HarmonicSum::new(vec![Harmonic { coord, frequency: freq, amplitude: w, phase: phase + PI / 2.0 }]);
        prop_assert!(d.sub(&exact.sample(&grid)).sup_norm() <= 1e-13 * w);
    }

    #[test]
    fn total_density_is_the_volume(seed in any::<u64>(), amp in 0.01f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (n, active) in [(1usize, vec![0usize, 1]), (2, vec![0, 4])] {
            let grid = SpectralGrid::new(n, &active, 16).unwrap();
            let psi = band_limited(&grid, &mut rng, 5, 2, amp);
            let total = ma_density(&psi).integrate();
            prop_assert!((total - grid.volume()).abs() <= 1e-10 * grid.volume(), "{total}");
        }
    }

    #[test]
    fn shifted_integrals_agree_with_direct_ones(seed in any::<u64>(), amp in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = SpectralGrid::new(2, &[0, 4], 16).unwrap();
        let phi = band_limited(&grid, &mut rng, 5, 2, amp);
        prop_assert!(shift_discrepancy(&phi, &[1.0, 2.0, 5.0, 10.0]) <= 1e-10);
        prop_assert!(holder_excess(&phi, &[1.0, 4.0, 16.0, 64.0], 8.0 / 7.0) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn additive_constants_do_not_change_the_solution(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SolveConfig::default();
        for (n, active) in [(1usize, vec![0usize, 1]), (2, vec![0, 4])] {
            let grid = SpectralGrid::new(n, &active, 16).unwrap();
            let shape = HarmonicSum::random(&active, &mut rng, 3, 2).scaled(0.2);
            let f = shape.sample(&grid);
            let a = solve(&f, &cfg).unwrap();
            let b = solve(&f.shift(c), &cfg).unwrap();
            prop_assert!(a.phi.sub(&b.phi).sup_norm() <= 1e-10);
            prop_assert!(a.mass_defect.abs() <= 1e-10);
            prop_assert!(a.min_eigenvalue >= -1e-9 && a.path_min_eigenvalue >= -1e-9);
            prop_assert!(a.phi.max() == 0.0);
        }
    }
}
