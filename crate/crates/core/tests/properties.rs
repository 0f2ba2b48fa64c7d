use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use spgen::genfun::{build_genfun, graph_from_phi};
use spgen::metaplectic::{quantize_general, GaussianState};
use spgen::symplectic::{
    graph_embed, j_matrix, omega_complex, random_algebra_element, sample_symplectic, seeded_rng,
    symplectic_residual, ComplexGraphPoint, ComplexVector, SampleSpec, SymplecticMatrix,
};
use spgen::xmap::{canonical_rep, conjugation_covariance_check, xmap, xmap_kernel};

fn spec_strategy(n: usize) -> impl Strategy<Value = SampleSpec> {
    prop_oneof![
        Just(SampleSpec::Generic),
        (0..=n).prop_map(|rank| SampleSpec::SingularB { rank }),
        (0..=n).prop_map(|rank| SampleSpec::MixedSingularB { rank }),
        (0..=n).prop_map(|k| SampleSpec::Witness { k }),
    ]
}

fn sample() -> impl Strategy<Value = SymplecticMatrix> {
    (1usize..=3)
        .prop_flat_map(|n| (Just(n), any::<u64>(), spec_strategy(n)))
        .prop_map(|(n, seed, spec)| sample_symplectic(n, seed, spec).expect("sampler"))
}

fn complex_vec(n: usize) -> impl Strategy<Value = ComplexVector> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n)
        .prop_map(|v| ComplexVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn point(n: usize) -> impl Strategy<Value = ComplexGraphPoint> {
    (complex_vec(n), complex_vec(n)).prop_map(|(z, zeta)| ComplexGraphPoint::new(z, zeta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn omega_is_antisymmetric((p, q) in (1usize..=3).prop_flat_map(|n| (point(n), point(n)))) {
        let s = omega_complex(&p, &q) + omega_complex(&q, &p);
        prop_assert!(s.norm() < 1e-12);
        prop_assert!(omega_complex(&p, &p).norm() < 1e-12);
    }

    #[test]
    fn samples_are_symplectic_and_closed(h in sample(), seed in any::<u64>()) {
        let r = sample_symplectic(h.n(), seed, SampleSpec::Generic).unwrap();
        let scale = h.frobenius_norm().powi(2) * r.frobenius_norm().powi(2);
        prop_assert!(symplectic_residual(h.compose(&r).matrix()) < 1e-12 * scale.max(1.0));
        prop_assert!(symplectic_residual(h.inverse().matrix()) < 1e-12 * h.frobenius_norm().powi(2).max(1.0));
    }

    #[test]
    fn xmap_matches_direct_formula_and_inverse(h in sample()) {
        let j = j_matrix(h.n());
        let direct = &j * h.matrix() + h.matrix().transpose() * &j;
        let scale = h.frobenius_norm().max(1.0);
        prop_assert!((xmap(&h).matrix() - &direct).amax() < 1e-12 * scale);
        prop_assert!((xmap(&h.inverse()).matrix() - &direct).amax() < 1e-12 * scale);
    }

    #[test]
    fn omega_on_graph_is_i_times_xmap_form(h in sample(), x in prop::collection::vec(-2.0..2.0f64, 12)) {
        // ω on two points of the complex graph is purely imaginary and equals
        // i times the quadratic form of X(H) on the real parameters.
        let n = h.n();
        let (a, b) = (DVector::from_column_slice(&x[..2 * n]), DVector::from_column_slice(&x[6..6 + 2 * n]));
        let p = graph_embed(&h, &a.rows(0, n).into_owned(), &a.rows(n, n).into_owned());
        let q = graph_embed(&h, &b.rows(0, n).into_owned(), &b.rows(n, n).into_owned());
        let w = omega_complex(&p, &q);
        let form = (a.transpose() * xmap(&h).matrix() * &b)[(0, 0)];
        let scale = h.frobenius_norm().max(1.0) * a.norm().max(1.0) * b.norm().max(1.0);
        prop_assert!(w.re.abs() < 1e-12 * scale);
        prop_assert!((w.im - form).abs() < 1e-12 * scale, "omega {w} form {form}");
    }

    #[test]
    fn canonical_rep_is_coset_invariant(h in sample(), seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let x = random_algebra_element(h.n(), &mut rng, 1.0);
        let base = canonical_rep(h.matrix()).unwrap();
        let shifted = canonical_rep(&(h.matrix() + x.matrix())).unwrap();
        prop_assert!(base.max_abs_diff(&shifted) < 1e-12 * h.frobenius_norm().max(1.0));
    }

    #[test]
    fn xmap_conjugation_covariance(h in sample(), seed in any::<u64>()) {
        let r = sample_symplectic(h.n(), seed, SampleSpec::Generic).unwrap();
        prop_assert!(conjugation_covariance_check(&h, &r).unwrap() < 1e-9);
    }

    #[test]
    fn kernel_matches_h_squared_plus_identity(h in sample()) {
        prop_assert!(xmap_kernel(&h).agrees(1e-6));
    }

    #[test]
    fn generating_function_reproduces_graph(h in sample(), x in prop::collection::vec(-2.0..2.0f64, 6)) {
        let n = h.n();
        let gf = build_genfun(&h).unwrap();
        let fit = graph_from_phi(
            &gf,
            &DVector::from_column_slice(&x[..n]),
            &DVector::from_column_slice(&x[3..3 + n]),
            &h,
        ).unwrap();
        prop_assert!(fit.scaled_residual() < 1e-8, "residual {}", fit.scaled_residual());
    }

    #[test]
    fn quantization_preserves_norm(h in sample(), re in -1.0..1.0f64, im in 0.3..3.0f64) {
        let n = h.n();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(re, im) } else { Complex64::new(0.1 * re, 0.0) }
        });
        let u = GaussianState::new(m, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let v = quantize_general(&h, &u, None).unwrap();
        prop_assert!((v.norm() / u.norm() - 1.0).abs() < 1e-8);
    }
}
