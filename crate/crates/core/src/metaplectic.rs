//! Quantization of linear symplectomorphisms on Gaussian states.
//!
//! For invertible `B` the operator is
//! `v(q) = a h^{-n/2} ∫ exp(iΦ(p, q)/h) u(p) dp` with the classical phase
//! `Φ(p, q) = ½ pᵀB⁻¹Ap − pᵀB⁻¹q + ½ qᵀDB⁻¹q`. On `u = c exp(i xᵀMx / 2h)`
//! the integral is a complex Gaussian and the result is again a Gaussian
//! with `M' = (C + DM)(A + BM)⁻¹`. Every other `H` is factored through
//! rotations. The trapezoid-rule [`grid_quantize`] is kept as an oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::genfun::{b_condition_ratio, Branch, GeneratingFunction, SINGULAR_B_RATIO};
use crate::linalg::SortedSvd;
use crate::symplectic::{rotation, RealMatrix, SymplecticMatrix};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Smallest `σ_min(B)/σ_max(B)` accepted for a factor of [`quantize_general`].
pub const SHIFT_RATIO: f64 = 1e-4;
/// Number of shifts `t = 0.1, 0.2, …` tried by [`quantize_general`].
pub const SHIFT_SCAN: usize = 60;

/// `u(x) = c exp(i xᵀMx / 2h)` with `Im M` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub n: usize,
    pub m: ComplexMatrix,
    pub c: Complex64,
    pub h: f64,
}

impl GaussianState {
    pub fn new(m: ComplexMatrix, c: Complex64, h: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidState(format!("M is {}x{}", m.nrows(), m.ncols())));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidState(format!("h = {h} must be positive")));
        }
        if !c.is_finite() || m.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("Gaussian state"));
        }
        let asym = (&m - m.transpose()).camax();
        if asym > 1e-12 * m.camax().max(1.0) {
            return Err(Error::InvalidState(format!("M is not symmetric (deviation {asym:.3e})")));
        }
        let m = (&m + m.transpose()) * Complex64::new(0.5, 0.0);
        let im = m.map(|z| z.im);
        let lowest = im.clone().symmetric_eigen().eigenvalues.min();
        if lowest <= 0.0 {
            return Err(Error::InvalidState(format!("Im M is not positive definite (eigenvalue {lowest:.3e})")));
        }
        Ok(GaussianState { n: m.nrows(), m, c, h })
    }

    /// `M = iI`, `c = 1`.
    pub fn standard(n: usize, h: f64) -> Self {
        GaussianState {
            n,
            m: ComplexMatrix::identity(n, n) * Complex64::i(),
            c: Complex64::new(1.0, 0.0),
            h,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> Complex64 {
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let quad = xc.dot(&(&self.m * &xc));
        self.c * (Complex64::i() * quad / (2.0 * self.h)).exp()
    }

    /// `‖u‖² = |c|² (πh)^{n/2} det(Im M)^{-1/2}`.
    pub fn norm_squared(&self) -> f64 {
        let det = self.m.map(|z| z.im).determinant();
        self.c.norm_sqr() * (PI * self.h).powf(self.n as f64 / 2.0) / det.sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `⟨other, self⟩ = ∫ conj(other) · self`.
    pub fn inner(&self, other: &GaussianState) -> Result<Complex64> {
        if self.n != other.n || self.h != other.h {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let k = &self.m - other.m.map(|z| z.conj());
        let scale = Complex64::new((2.0 * PI * self.h).powf(self.n as f64 / 2.0), 0.0);
        Ok(other.c.conj() * self.c * scale * inv_sqrt_det_minus_i(&k)?)
    }
}

/// `det(−iK)^{-1/2}` for symmetric `K` with `Im K` positive definite.
///
/// With `P = Im K`, `S = Re K` and `σ_j` the eigenvalues of
/// `P^{-1/2} S P^{-1/2}`, `det(−iK) = det P · Π(1 − iσ_j)`. Each factor has
/// positive real part, so taking principal roots factor by factor follows
/// the branch continuously from `S = 0`.
pub fn inv_sqrt_det_minus_i(k: &ComplexMatrix) -> Result<Complex64> {
    let p = k.map(|z| z.im);
    let s = k.map(|z| z.re);
    let eig = p.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidState("imaginary part of the quadratic form is not positive definite".into()));
    }
    let inv_root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let w = &inv_root * s * &inv_root;
    let sigma = ((&w + w.transpose()) * 0.5).symmetric_eigenvalues();
    let mut root = Complex64::new(eig.eigenvalues.product().sqrt(), 0.0);
    for s in sigma.iter() {
        root *= Complex64::new(1.0, -s).sqrt();
    }
    Ok(root.inv())
}

fn check_dims(h: &SymplecticMatrix, u: &GaussianState) -> Result<()> {
    if h.n() != u.n {
        return Err(Error::DimensionMismatch { expected: h.n(), found: u.n });
    }
    Ok(())
}

fn real_to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Closed-form Gaussian integral with `a = 1`.
fn propagate_unnormalized(h: &SymplecticMatrix, u: &GaussianState) -> Result<GaussianState> {
    let n = u.n;
    let b = h.b();
    let ratio = b_condition_ratio(h);
    if ratio <= SINGULAR_B_RATIO {
        return Err(Error::SingularB { ratio });
    }
    let binv = b.clone().lu().try_inverse().ok_or(Error::SingularB { ratio })?;
    let (a, c, d) = (real_to_complex(&h.a()), real_to_complex(&h.c()), real_to_complex(&h.d()));
    let bc = real_to_complex(&b);
    let denom = &a + &bc * &u.m;
    let dsvd = SortedSvd::new(&denom.map(|z| z.norm()));
    let lu = denom.clone().lu();
    let denom_inv = lu.try_inverse().ok_or(Error::Caustic { sigma_min: dsvd.sigma_min() })?;
    let m_new = (&c + &d * &u.m) * &denom_inv;
    let m_new = (&m_new + m_new.transpose()) * Complex64::new(0.5, 0.0);
    let k = real_to_complex(&(&binv * h.a())) + &u.m;
    let amp = u.c * Complex64::new((2.0 * PI).powf(n as f64 / 2.0), 0.0) * inv_sqrt_det_minus_i(&k)?;
    GaussianState::new(m_new, amp, u.h)
}

/// Normalization constant making the invertible-`B` operator unitary,
/// fixed on the reference state `M = iI`, `c = 1`.
pub fn normalization(h: &SymplecticMatrix, hbar: f64) -> Result<f64> {
    let reference = GaussianState::standard(h.n(), hbar);
    let raw = propagate_unnormalized(h, &reference)?;
    Ok((reference.norm_squared() / raw.norm_squared()).sqrt())
}

/// The operator of `H` (invertible `B`) on a Gaussian state.
pub fn quantize_gaussian(h: &SymplecticMatrix, u: &GaussianState) -> Result<GaussianState> {
    check_dims(h, u)?;
    let a = normalization(h, u.h)?;
    let mut v = propagate_unnormalized(h, u)?;
    v.c *= a;
    Ok(v)
}

fn well_conditioned(h: &SymplecticMatrix) -> bool {
    b_condition_ratio(h) > SHIFT_RATIO
}

/// First `t ∈ {0.1, 0.2, …, 6.0}` for which both `H R(−t)` and `R(t)` have
/// well-conditioned `B` blocks.
pub fn admissible_shift(h: &SymplecticMatrix) -> Result<f64> {
    (1..=SHIFT_SCAN)
        .map(|i| i as f64 * 0.1)
        .find(|&t| well_conditioned(&h.compose(&rotation(h.n(), -t))) && well_conditioned(&rotation(h.n(), t)))
        .ok_or(Error::NoAdmissibleShift)
}

/// The operator of any `H`. Comfortably invertible `B` goes straight to
/// [`quantize_gaussian`] unless a shift is forced; otherwise
/// `H = (H R(−t)) R(t)` and the two factors are applied in turn.
pub fn quantize_general(h: &SymplecticMatrix, u: &GaussianState, t_shift: Option<f64>) -> Result<GaussianState> {
    check_dims(h, u)?;
    let t = match t_shift {
        None if well_conditioned(h) => return quantize_gaussian(h, u),
        None => admissible_shift(h)?,
        Some(t) => {
            let left = h.compose(&rotation(h.n(), -t));
            if !well_conditioned(&left) || !well_conditioned(&rotation(h.n(), t)) {
                return Err(Error::InvalidParameter(format!("shift t = {t} gives an ill-conditioned factor")));
            }
            t
        }
    };
    let first = quantize_gaussian(&rotation(h.n(), t), u)?;
    quantize_gaussian(&h.compose(&rotation(h.n(), -t)), &first)
}

/// `min_{|κ| = 1} ‖v₁ − κ v₂‖ / ‖v₂‖`.
pub fn phase_discrepancy(v1: &GaussianState, v2: &GaussianState) -> Result<f64> {
    let n1 = v1.norm_squared();
    let n2 = v2.norm_squared();
    let overlap = v1.inner(v2)?.norm();
    Ok(((n1 + n2 - 2.0 * overlap).max(0.0) / n2).sqrt())
}

#[derive(Debug, Clone)]
pub struct CompositionReport {
    /// `μ(H₁)(μ(H₂)u)`.
    pub sequential: GaussianState,
    /// `μ(H₁H₂)u`.
    pub direct: GaussianState,
    pub discrepancy: f64,
    /// Unimodular `κ` with `sequential ≈ κ · direct`.
    pub phase: Complex64,
}

/// Compares `μ(H₁)μ(H₂)u` with `μ(H₁H₂)u` up to a unimodular scalar.
pub fn composition_check(h1: &SymplecticMatrix, h2: &SymplecticMatrix, u: &GaussianState) -> Result<CompositionReport> {
    let sequential = quantize_general(h1, &quantize_general(h2, u, None)?, None)?;
    let direct = quantize_general(&h1.compose(h2), u, None)?;
    let discrepancy = phase_discrepancy(&sequential, &direct)?;
    let overlap = sequential.inner(&direct)?;
    let phase = overlap / overlap.norm();
    Ok(CompositionReport { sequential, direct, discrepancy, phase })
}

#[derive(Debug, Clone)]
pub struct ShiftCoherence {
    pub m_difference: f64,
    /// `| |c₁/c₂| − 1 |`.
    pub modulus_gap: f64,
}

/// Runs [`quantize_general`] with two forced shifts and compares the outputs.
pub fn shift_coherence(h: &SymplecticMatrix, u: &GaussianState, t1: f64, t2: f64) -> Result<ShiftCoherence> {
    let v1 = quantize_general(h, u, Some(t1))?;
    let v2 = quantize_general(h, u, Some(t2))?;
    Ok(ShiftCoherence {
        m_difference: (&v1.m - &v2.m).camax(),
        modulus_gap: ((v1.c / v2.c).norm() - 1.0).abs(),
    })
}

/// Rank test of the auxiliary-variable Hessian of a general-branch phase.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub rank: usize,
    pub expected_rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Largest deviation from the expected block pattern: `−b_j` in the
    /// `(Re z, θ')` block, `0` in `(θ, θ')`, `2I` in `(θ'', θ'')`.
    pub structure_residual: f64,
    pub passed: bool,
}

/// Checks that `d(∂Φ/∂θ_1), …, d(∂Φ/∂θ_2n)` are linearly independent, i.e.
/// that the `4n x 2n` matrix of second derivatives `∂²Φ/∂v∂θ` has full rank.
pub fn phase_nondegeneracy_check(gf: &GeneratingFunction) -> Result<PhaseReport> {
    if gf.branch() != Branch::General {
        return Err(Error::Precondition("phase has no auxiliary variables".into()));
    }
    let n = gf.n();
    let k = gf.k();
    let td = gf.theta_dim();
    let cols = gf.q().columns(2 * n, td).into_owned();
    let svd = SortedSvd::new(&cols);
    let (smax, smin) = (svd.sigma_max(), svd.sigma_min());
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();

    let mut structure: f64 = 0.0;
    for j in 0..k {
        let col = cols.column(j);
        structure = structure.max((col.rows(0, n) + gf.b().column(j)).amax());
        structure = structure.max(col.rows(2 * n, td).amax());
    }
    let tail = cols.view((2 * n + k, k), (td - k, td - k)).into_owned();
    structure = structure.max((tail - RealMatrix::identity(td - k, td - k) * 2.0).amax());

    Ok(PhaseReport {
        rank,
        expected_rank: 2 * n,
        sigma_min: smin,
        sigma_max: smax,
        structure_residual: structure,
        passed: rank == 2 * n && structure < 1e-12 * gf.q().amax().max(1.0),
    })
}

/// Samples of a one-dimensional field on the uniform grid
/// `x_j = −L + j · 2L/(N − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub half_width: f64,
    pub samples: Vec<Complex64>,
}

impl GridField {
    pub fn new(half_width: f64, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() < 64 {
            return Err(Error::InvalidParameter(format!("grid needs at least 64 samples, got {}", samples.len())));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("half-width {half_width} must be positive")));
        }
        if samples.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("grid samples"));
        }
        Ok(GridField { half_width, samples })
    }

    pub fn sample_gaussian(u: &GaussianState, half_width: f64, count: usize) -> Result<Self> {
        if u.n != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: u.n });
        }
        let step = 2.0 * half_width / (count.max(2) - 1) as f64;
        let samples = (0..count)
            .map(|j| u.eval(&DVector::from_element(1, -half_width + j as f64 * step)))
            .collect();
        Self::new(half_width, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.len() - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.step()
    }

    /// `‖f − g‖ / ‖g‖` on the grid.
    pub fn relative_l2(&self, reference: &GridField) -> f64 {
        let num: f64 = self.samples.iter().zip(&reference.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = reference.samples.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }

    /// Trapezoid approximation of `∫|f|²`.
    pub fn norm_squared(&self) -> f64 {
        let last = self.len() - 1;
        self.samples
            .iter()
            .enumerate()
            .map(|(j, z)| if j == 0 || j == last { 0.5 } else { 1.0 } * z.norm_sqr())
            .sum::<f64>()
            * self.step()
    }

    fn add(&self, other: &GridField) -> GridField {
        GridField {
            half_width: self.half_width,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Add for &GridField {
    type Output = GridField;
    fn add(self, rhs: &GridField) -> GridField {
        GridField::add(self, rhs)
    }
}

/// Brute-force trapezoid quadrature of the invertible-`B` kernel, `n = 1`,
/// evaluated on the input grid.
pub fn grid_quantize(h: &SymplecticMatrix, f: &GridField, hbar: f64) -> Result<GridField> {
    if h.n() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: h.n() });
    }
    let peak = f.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = f.samples[0].norm().max(f.samples[f.len() - 1].norm());
    if edge > 1e-12 * peak {
        return Err(Error::InvalidParameter(format!("field does not decay at the grid edge ({:.3e} of peak)", edge / peak)));
    }
    let a = normalization(h, hbar)?;
    let (ha, hb, hd) = (h.a()[(0, 0)], h.b()[(0, 0)], h.d()[(0, 0)]);
    let phi = |p: f64, q: f64| (0.5 * p * p * ha - p * q + 0.5 * q * q * hd) / hb;
    let last = f.len() - 1;
    let weight = a * hbar.powf(-0.5) * f.step();
    let samples = (0..f.len())
        .map(|i| {
            let q = f.point(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, fj) in f.samples.iter().enumerate() {
                let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                acc += fj * Complex64::from_polar(w, phi(f.point(j), q) / hbar);
            }
            acc * weight
        })
        .collect();
    GridField::new(f.half_width, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{build_genfun, build_genfun_general};
    use crate::symplectic::{sample_symplectic, standard_j, SampleSpec};

    fn m1(re: f64, im: f64) -> ComplexMatrix {
        ComplexMatrix::from_element(1, 1, Complex64::new(re, im))
    }

    #[test]
    fn state_validation() {
        assert!(GaussianState::new(m1(0.0, -1.0), Complex64::new(1.0, 0.0), 1.0).is_err());
        assert!(GaussianState::new(m1(0.0, 1.0), Complex64::new(1.0, 0.0), 0.0).is_err());
        let asym = ComplexMatrix::from_row_slice(2, 2, &[
            Complex64::i(), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::i(),
        ]);
        assert!(GaussianState::new(asym, Complex64::new(1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn norm_matches_quadrature() {
        let u = GaussianState::new(m1(0.7, 0.4), Complex64::new(0.5, -1.0), 1.3).unwrap();
        let grid = GridField::sample_gaussian(&u, 20.0, 4001).unwrap();
        assert!((grid.norm_squared() - u.norm_squared()).abs() < 1e-10 * u.norm_squared());
        let w = GaussianState::new(m1(-0.3, 1.1), Complex64::new(2.0, 0.5), 1.3).unwrap();
        let gw = GridField::sample_gaussian(&w, 20.0, 4001).unwrap();
        let step = grid.step();
        let quad: Complex64 = grid.samples.iter().zip(&gw.samples).map(|(a, b)| b.conj() * a).sum::<Complex64>() * step;
        assert!((quad - u.inner(&w).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn fourier_transform_fixes_standard_gaussian() {
        let u = GaussianState::standard(1, 1.0);
        let v = quantize_gaussian(&standard_j(1), &u).unwrap();
        assert!((&v.m - &u.m).camax() < 1e-14);
        assert!((v.norm() - u.norm()).abs() < 1e-14);
    }

    #[test]
    fn singular_b_is_refused_by_direct_path() {
        let u = GaussianState::standard(2, 1.0);
        assert!(matches!(quantize_gaussian(&SymplecticMatrix::identity(2), &u), Err(Error::SingularB { .. })));
    }

    #[test]
    fn mobius_action_and_unitarity() {
        for seed in 0..30 {
            let n = 1 + (seed % 3) as usize;
            let h = sample_symplectic(n, seed, SampleSpec::Generic).unwrap();
            let mut m = ComplexMatrix::identity(n, n) * Complex64::new(0.3, 1.5);
            m[(0, n - 1)] += Complex64::new(0.1, 0.05);
            m[(n - 1, 0)] = m[(0, n - 1)];
            let u = GaussianState::new(m, Complex64::new(0.8, 0.6), 1.0).unwrap();
            let v = quantize_gaussian(&h, &u).unwrap();
            let (a, b, c, d) = (real_to_complex(&h.a()), real_to_complex(&h.b()), real_to_complex(&h.c()), real_to_complex(&h.d()));
            let expected = (&c + &d * &u.m) * (&a + &b * &u.m).try_inverse().unwrap();
            assert!((&v.m - expected).camax() < 1e-8 * v.m.camax().max(1.0), "seed {seed}");
            assert!((v.norm() - u.norm()).abs() < 1e-10 * u.norm(), "seed {seed}");
        }
    }

    #[test]
    fn closed_form_matches_grid_for_j() {
        let u = GaussianState::standard(1, 1.0);
        let f = GridField::sample_gaussian(&u, 12.0, 2048).unwrap();
        let j = standard_j(1);
        let grid = grid_quantize(&j, &f, 1.0).unwrap();
        let exact = GridField::sample_gaussian(&quantize_gaussian(&j, &u).unwrap(), 12.0, 2048).unwrap();
        assert!(grid.relative_l2(&exact) < 1e-3);
    }

    #[test]
    fn grid_quantize_is_linear() {
        let h = rotation(1, 0.9);
        let u = GaussianState::new(m1(0.2, 1.0), Complex64::new(1.0, 0.0), 1.0).unwrap();
        let w = GaussianState::new(m1(-0.5, 2.0), Complex64::new(0.0, 1.0), 1.0).unwrap();
        let (fu, fw) = (GridField::sample_gaussian(&u, 12.0, 256).unwrap(), GridField::sample_gaussian(&w, 12.0, 256).unwrap());
        let lhs = grid_quantize(&h, &(&fu + &fw), 1.0).unwrap();
        let rhs = &grid_quantize(&h, &fu, 1.0).unwrap() + &grid_quantize(&h, &fw, 1.0).unwrap();
        assert!(lhs.relative_l2(&rhs) < 1e-10);
    }

    #[test]
    fn grid_requires_decay() {
        let u = GaussianState::new(m1(0.0, 0.01), Complex64::new(1.0, 0.0), 1.0).unwrap();
        let f = GridField::sample_gaussian(&u, 12.0, 128).unwrap();
        assert!(grid_quantize(&standard_j(1), &f, 1.0).is_err());
    }

    #[test]
    fn general_quantization_of_identity_and_shear() {
        let u = GaussianState::new(m1(0.4, 0.9), Complex64::new(1.0, 0.0), 1.0).unwrap();
        let v = quantize_general(&SymplecticMatrix::identity(1), &u, None).unwrap();
        assert!(phase_discrepancy(&v, &u).unwrap() < 1e-7);
        assert!((v.c.norm() - u.c.norm()).abs() < 1e-10);

        let shear = SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.8, 1.0])).unwrap();
        let v = quantize_general(&shear, &u, None).unwrap();
        assert!((v.norm() - u.norm()).abs() < 1e-8);
        // Multiplication by exp(i c x²/2h) adds c to M.
        assert!((v.m[(0, 0)] - Complex64::new(1.2, 0.9)).norm() < 1e-10);
    }

    #[test]
    fn shift_coherence_holds() {
        let u = GaussianState::standard(2, 1.0);
        let h = sample_symplectic(2, 4, SampleSpec::SingularB { rank: 1 }).unwrap();
        let r = shift_coherence(&h, &u, 0.3, 1.1).unwrap();
        assert!(r.m_difference < 1e-8 && r.modulus_gap < 1e-8);
    }

    #[test]
    fn fourier_squared_is_parity() {
        let u = GaussianState::new(m1(0.3, 0.7), Complex64::new(1.0, 0.0), 1.0).unwrap();
        let j = standard_j(1);
        let minus = SymplecticMatrix::new(-DMatrix::<f64>::identity(2, 2)).unwrap();
        let sequential = quantize_general(&j, &quantize_general(&j, &u, None).unwrap(), None).unwrap();
        let direct = quantize_general(&minus, &u, None).unwrap();
        assert!(phase_discrepancy(&sequential, &direct).unwrap() < 1e-6);
        let r = composition_check(&j, &j, &u).unwrap();
        assert!(r.discrepancy < 1e-6);
        assert!((r.phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composition_with_inverse_is_scalar() {
        let u = GaussianState::standard(2, 1.0);
        let h = sample_symplectic(2, 9, SampleSpec::Generic).unwrap();
        let r = composition_check(&h, &h.inverse(), &u).unwrap();
        assert!(r.discrepancy < 1e-6);
        assert!(phase_discrepancy(&r.sequential, &u).unwrap() < 1e-6);
    }

    #[test]
    fn phase_check_cases() {
        let gf = build_genfun(&SymplecticMatrix::identity(2)).unwrap();
        let r = phase_nondegeneracy_check(&gf).unwrap();
        assert!(r.passed && r.rank == 4);
        let h = sample_symplectic(2, 6, SampleSpec::SingularB { rank: 1 }).unwrap();
        let r = phase_nondegeneracy_check(&build_genfun_general(&h).unwrap()).unwrap();
        assert!(r.passed, "{r:?}");
        let gf = build_genfun(&standard_j(1)).unwrap();
        assert!(matches!(phase_nondegeneracy_check(&gf), Err(Error::Precondition(_))));
    }
}
