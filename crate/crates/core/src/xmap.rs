//! The skew-valued map `X(H) = JH + HᵀJ`, its companion `Y(H) = H − Hᵀ`,
//! and the canonical representatives of `M(2n) / sp(2n)`.
//!
//! `X(H)` is the matrix of `Im ω` on the real graph of `H`: for graph points
//! built from `(x, ξ)` and `(x', ξ')` the complex form equals
//! `i (x, ξ)ᵀ X(H) (x', ξ')`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{subspace_distance, SortedSvd};
use crate::symplectic::{assemble_blocks, half_dim, j_matrix, rotation, RealMatrix, SkewMatrix, SymplecticMatrix};

/// `JM + MᵀJ` for any even square matrix.
pub fn xmap_extended(m: &RealMatrix) -> Result<SkewMatrix> {
    let n = half_dim(m)?;
    let j = j_matrix(n);
    SkewMatrix::from_matrix(&(&j * m + m.transpose() * &j))
}

/// Block formula `[[Cᵀ − C, −Aᵀ − D], [A + Dᵀ, B − Bᵀ]]`.
pub fn xmap(h: &SymplecticMatrix) -> SkewMatrix {
    let (a, b, c, d) = (h.a(), h.b(), h.c(), h.d());
    let m = assemble_blocks(
        &(c.transpose() - &c),
        &(-a.transpose() - &d),
        &(&a + d.transpose()),
        &(&b - b.transpose()),
    );
    SkewMatrix::from_matrix(&m).expect("square by construction")
}

/// `J(H + H⁻¹)`, the group-level expression of the same map.
pub fn xmap_via_inverse(h: &SymplecticMatrix) -> RealMatrix {
    j_matrix(h.n()) * (h.matrix() + h.inverse().matrix())
}

/// `Y(H) = H − Hᵀ = X(−JH)`.
pub fn ymap(h: &SymplecticMatrix) -> SkewMatrix {
    SkewMatrix::from_matrix(&(h.matrix() - h.matrix().transpose())).expect("square by construction")
}

/// Unique representative `[[0, S₂], [S₃, D]]` of a coset of `sp(2n)`,
/// with `S₂`, `S₃` skew.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientRep {
    pub n: usize,
    pub s2: RealMatrix,
    pub s3: RealMatrix,
    pub dfree: RealMatrix,
}

impl QuotientRep {
    pub fn assemble(&self) -> RealMatrix {
        assemble_blocks(&RealMatrix::zeros(self.n, self.n), &self.s2, &self.s3, &self.dfree)
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &QuotientRep) -> f64 {
        (self.assemble() - other.assemble()).amax()
    }
}

/// Subtracts the `sp` part `[[M₁, sym M₂], [sym M₃, −M₁ᵀ]]`, leaving
/// `[[0, skew M₂], [skew M₃, M₄ + M₁ᵀ]]`.
pub fn canonical_rep(m: &RealMatrix) -> Result<QuotientRep> {
    let n = half_dim(m)?;
    let m1 = m.view((0, 0), (n, n));
    let m2 = m.view((0, n), (n, n));
    let m3 = m.view((n, 0), (n, n));
    let m4 = m.view((n, n), (n, n));
    Ok(QuotientRep {
        n,
        s2: (m2 - m2.transpose()) * 0.5,
        s3: (m3 - m3.transpose()) * 0.5,
        dfree: m4 + m1.transpose(),
    })
}

/// `π(H) = [[0, ½(B − Bᵀ)], [½(C − Cᵀ), Aᵀ + D]]`, written from the blocks.
pub fn pi_sp(h: &SymplecticMatrix) -> QuotientRep {
    let (a, b, c, d) = (h.a(), h.b(), h.c(), h.d());
    QuotientRep {
        n: h.n(),
        s2: (&b - b.transpose()) * 0.5,
        s3: (&c - c.transpose()) * 0.5,
        dfree: a.transpose() + d,
    }
}

/// Null space of `X(H)` next to the null space of `H² + I`.
#[derive(Debug, Clone)]
pub struct KernelReport {
    /// Orthonormal basis of `ker X(H)`, one vector per column.
    pub basis: RealMatrix,
    pub h2_plus_i_basis: RealMatrix,
    /// `sin` of the largest principal angle between the two spaces
    /// (1 if their dimensions differ).
    pub subspace_gap: f64,
}

impl KernelReport {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn agrees(&self, tol: f64) -> bool {
        self.basis.ncols() == self.h2_plus_i_basis.ncols() && self.subspace_gap < tol
    }
}

pub fn xmap_kernel(h: &SymplecticMatrix) -> KernelReport {
    let x = xmap(h);
    let basis = SortedSvd::new(x.matrix()).null_space();
    let h2 = h.matrix() * h.matrix() + RealMatrix::identity(2 * h.n(), 2 * h.n());
    let other = SortedSvd::new(&h2).null_space();
    let subspace_gap = subspace_distance(&basis, &other);
    KernelReport { basis, h2_plus_i_basis: other, subspace_gap }
}

pub fn xmap_rank(h: &SymplecticMatrix) -> usize {
    SortedSvd::new(xmap(h).matrix()).rank()
}

/// Distance from `-1` to the nearest eigenvalue of `H²` (eigenvalues from
/// the real Schur form).
pub fn distance_of_minus_one_to_spectrum_of_square(h: &SymplecticMatrix) -> f64 {
    let h2 = h.matrix() * h.matrix();
    let eig = h2.complex_eigenvalues();
    eig.iter()
        .map(|l| ((l.re + 1.0).powi(2) + l.im.powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// `‖Hᵀ X(R) H − X(H⁻¹ R H)‖_F`.
pub fn conjugation_covariance_check(h: &SymplecticMatrix, r: &SymplecticMatrix) -> Result<f64> {
    if h.n() != r.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: r.n() });
    }
    let lhs = h.matrix().transpose() * xmap(r).matrix() * h.matrix();
    let conj = h.inverse().compose(r).compose(h);
    Ok((lhs - xmap(&conj).matrix()).norm())
}

/// Compares `X` of the planar rotation by `t` with `[[0, −2cos t I], [2cos t I, 0]]`.
pub fn rotation_example_check(t: f64, n: usize) -> f64 {
    let id = RealMatrix::identity(n, n);
    let z = RealMatrix::zeros(n, n);
    let expected = assemble_blocks(&z, &(&id * (-2.0 * t.cos())), &(&id * (2.0 * t.cos())), &z);
    (xmap(&rotation(n, t)).matrix() - expected).norm()
}

/// Matrix of the linear map `M ↦ JM + MᵀJ` on `M(2n)` in the basis of
/// matrix units (column-major vectorisation).
pub fn xmap_extended_operator(n: usize) -> DMatrix<f64> {
    let d = 2 * n;
    let mut op = DMatrix::<f64>::zeros(d * d, d * d);
    for col in 0..d * d {
        let mut e = RealMatrix::zeros(d, d);
        e[(col % d, col / d)] = 1.0;
        let image = xmap_extended(&e).expect("even dimension").into_matrix();
        op.set_column(col, &nalgebra::DVector::from_column_slice(image.as_slice()));
    }
    op
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{random_algebra_element, sample_symplectic, seeded_rng, standard_j, witness_hk, SampleSpec};
    use rand::Rng;

    #[test]
    fn algebra_elements_map_to_zero() {
        let mut rng = seeded_rng(1);
        for n in 1..=4 {
            let a = random_algebra_element(n, &mut rng, 1.0);
            assert!(xmap_extended(a.matrix()).unwrap().matrix().norm() < 1e-12);
        }
    }

    #[test]
    fn identity_maps_to_two_j() {
        for n in 1..=4 {
            let two_j = j_matrix(n) * 2.0;
            assert_eq!(xmap_extended(&RealMatrix::identity(2 * n, 2 * n)).unwrap().matrix(), &two_j);
            assert_eq!(xmap(&SymplecticMatrix::identity(n)).matrix(), &two_j);
        }
    }

    #[test]
    fn extended_map_is_linear() {
        let mut rng = seeded_rng(2);
        let m = RealMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let k = RealMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let lhs = xmap_extended(&(&m * a + &k * b)).unwrap().into_matrix();
        let rhs = xmap_extended(&m).unwrap().into_matrix() * a + xmap_extended(&k).unwrap().into_matrix() * b;
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(matches!(xmap_extended(&RealMatrix::zeros(3, 3)), Err(Error::OddDimension(3))));
    }

    #[test]
    fn j_maps_to_zero() {
        assert_eq!(xmap(&standard_j(3)).matrix(), &RealMatrix::zeros(6, 6));
    }

    #[test]
    fn upper_shear_maps_to_two_j() {
        let b = DMatrix::from_row_slice(2, 2, &[0.4, -1.0, -1.0, 2.0]);
        let id = RealMatrix::identity(2, 2);
        let h = SymplecticMatrix::from_blocks(&id, &b, &RealMatrix::zeros(2, 2), &id).unwrap();
        assert_eq!(xmap(&h).matrix(), &(j_matrix(2) * 2.0));
    }

    #[test]
    fn block_formula_agrees_with_extension_and_inverse_form() {
        for seed in 0..20 {
            let h = sample_symplectic(3, seed, SampleSpec::Generic).unwrap();
            let scale = h.frobenius_norm().max(1.0);
            let block = xmap(&h).into_matrix();
            assert!((&block - xmap_extended(h.matrix()).unwrap().into_matrix()).norm() < 1e-12 * scale);
            assert!((&block - xmap_via_inverse(&h)).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn ymap_cases() {
        let h = SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        assert_eq!(ymap(&h).matrix(), &RealMatrix::zeros(2, 2));
        assert_eq!(ymap(&standard_j(2)).matrix(), &(j_matrix(2) * 2.0));
        for seed in 0..100 {
            let h = sample_symplectic(2, seed, SampleSpec::Generic).unwrap();
            let minus_jh = -j_matrix(2) * h.matrix();
            let via_x = xmap_extended(&minus_jh).unwrap();
            assert!((ymap(&h).matrix() - via_x.matrix()).norm() < 1e-12 * h.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn canonical_rep_examples() {
        let mut rng = seeded_rng(5);
        let a = random_algebra_element(3, &mut rng, 1.0);
        let rep = canonical_rep(a.matrix()).unwrap();
        assert!(rep.assemble().amax() < 1e-15);

        let rep = canonical_rep(&RealMatrix::identity(4, 4)).unwrap();
        assert_eq!(rep.s2, RealMatrix::zeros(2, 2));
        assert_eq!(rep.s3, RealMatrix::zeros(2, 2));
        assert_eq!(rep.dfree, RealMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn canonical_rep_is_idempotent_and_coset_invariant() {
        let mut rng = seeded_rng(6);
        let m = RealMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let rep = canonical_rep(&m).unwrap();
        assert!(canonical_rep(&rep.assemble()).unwrap().max_abs_diff(&rep) < 1e-15);
        // M − rep ∈ sp
        assert!(xmap_extended(&(&m - rep.assemble())).unwrap().matrix().norm() < 1e-12);
        let shifted = &m + random_algebra_element(3, &mut rng, 1.0).matrix();
        assert!(canonical_rep(&shifted).unwrap().max_abs_diff(&rep) < 1e-12);
    }

    #[test]
    fn pi_examples() {
        let rep = pi_sp(&SymplecticMatrix::identity(2));
        assert_eq!(rep.dfree, RealMatrix::identity(2, 2) * 2.0);
        assert_eq!(rep.s2, RealMatrix::zeros(2, 2));
        assert_eq!(pi_sp(&standard_j(2)).assemble(), RealMatrix::zeros(4, 4));
        let h = sample_symplectic(2, 3, SampleSpec::Generic).unwrap();
        assert!(pi_sp(&h).max_abs_diff(&canonical_rep(h.matrix()).unwrap()) < 1e-14);
    }

    #[test]
    fn kernel_examples() {
        let k = xmap_kernel(&standard_j(2));
        assert_eq!(k.dim(), 4);
        assert!(k.agrees(1e-6));
        let k = xmap_kernel(&SymplecticMatrix::identity(2));
        assert_eq!(k.dim(), 0);
        assert!(k.agrees(1e-6));
        for n in 1..=4 {
            for kk in 0..=n {
                let rep = xmap_kernel(&witness_hk(n, kk).unwrap());
                assert_eq!(rep.dim(), 2 * (n - kk));
                assert!(rep.agrees(1e-6));
            }
        }
    }

    #[test]
    fn witness_rank_and_singular_values() {
        for n in 1..=6 {
            for k in 0..=n {
                assert_eq!(xmap_rank(&witness_hk(n, k).unwrap()), 2 * k);
            }
        }
        let svd = SortedSvd::new(xmap(&witness_hk(2, 1).unwrap()).matrix());
        let expected = [2.0, 2.0, 0.0, 0.0];
        for (s, e) in svd.singular_values.iter().zip(expected) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugation_covariance_cases() {
        let h = sample_symplectic(3, 8, SampleSpec::Generic).unwrap();
        let r = sample_symplectic(3, 9, SampleSpec::Generic).unwrap();
        assert_eq!(conjugation_covariance_check(&SymplecticMatrix::identity(3), &r).unwrap(), 0.0);
        assert!(conjugation_covariance_check(&h, &standard_j(3)).unwrap() < 1e-9 * h.frobenius_norm().powi(2));
        let scale = h.frobenius_norm().powi(2) * r.frobenius_norm();
        assert!(conjugation_covariance_check(&h, &r).unwrap() < 1e-12 * scale);
    }

    #[test]
    fn rotation_examples() {
        assert!(rotation_example_check(0.0, 2) < 1e-15);
        assert!((xmap(&rotation(2, 0.0)).matrix() - j_matrix(2) * 2.0).norm() < 1e-15);
        assert!(xmap(&rotation(2, std::f64::consts::FRAC_PI_2)).matrix().norm() < 1e-15);
        assert!(rotation_example_check(0.3, 2) < 1e-12);
    }

    #[test]
    fn extended_operator_nullity_is_sp_dimension() {
        for n in 1..=3 {
            let op = xmap_extended_operator(n);
            let nullity = op.ncols() - SortedSvd::new(&op).rank();
            assert_eq!(nullity, n * (2 * n + 1));
        }
    }

    #[test]
    fn x_of_h_equals_x_of_inverse() {
        for seed in 0..10 {
            let h = sample_symplectic(2, seed, SampleSpec::Generic).unwrap();
            let d = (xmap(&h).into_matrix() - xmap(&h.inverse()).into_matrix()).norm();
            assert!(d < 1e-10 * h.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn invertibility_matches_spectrum_of_square() {
        let j = standard_j(2);
        assert!(distance_of_minus_one_to_spectrum_of_square(&j) < 1e-12);
        assert_eq!(xmap_rank(&j), 0);
        let id = SymplecticMatrix::identity(2);
        assert!((distance_of_minus_one_to_spectrum_of_square(&id) - 2.0).abs() < 1e-12);
    }
}
