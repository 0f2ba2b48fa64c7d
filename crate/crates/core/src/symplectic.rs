//! Real symplectic matrices, the symplectic Lie algebra, skew matrices and
//! points of the complexified graph.
//!
//! Block convention throughout the crate: a `2n x 2n` matrix acting on
//! `(x, ξ)` is written `[[A, B], [C, D]]`, so that `(x, ξ) ↦ (Ax + Bξ, Cx + Dξ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, expm};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative residual tolerance for the symplectic identities.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// The seeded generator used for every random draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Returns the half-dimension of an even square matrix.
pub fn half_dim(m: &RealMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() % 2 != 0 || m.nrows() == 0 {
        return Err(Error::OddDimension(m.nrows()));
    }
    Ok(m.nrows() / 2)
}

/// `[[0, -I], [I, 0]]` as a plain matrix.
pub fn j_matrix(n: usize) -> RealMatrix {
    let mut j = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

pub fn assemble_blocks(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix, d: &RealMatrix) -> RealMatrix {
    let n = a.nrows();
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// A real symplectic matrix `H` with `Hᵀ J H = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    n: usize,
    m: RealMatrix,
}

impl SymplecticMatrix {
    /// Validates `m` against [`SYMPLECTIC_TOL`].
    pub fn new(m: RealMatrix) -> Result<Self> {
        Self::with_tolerance(m, SYMPLECTIC_TOL)
    }

    pub fn with_tolerance(m: RealMatrix, tol: f64) -> Result<Self> {
        let n = half_dim(&m)?;
        if !all_finite(&m) {
            return Err(Error::NonFinite("symplectic matrix"));
        }
        let residual = symplectic_residual(&m);
        if residual > tol {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(SymplecticMatrix { n, m })
    }

    pub fn from_blocks(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix, d: &RealMatrix) -> Result<Self> {
        let n = a.nrows();
        for blk in [a, b, c, d] {
            if blk.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: blk.nrows() });
            }
        }
        Self::new(assemble_blocks(a, b, c, d))
    }

    /// Skips validation. Only for matrices symplectic by construction.
    pub(crate) fn from_matrix_unchecked(m: RealMatrix) -> Self {
        let n = m.nrows() / 2;
        SymplecticMatrix { n, m }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix_unchecked(RealMatrix::identity(2 * n, 2 * n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.m
    }

    pub fn a(&self) -> RealMatrix {
        self.m.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn b(&self) -> RealMatrix {
        self.m.view((0, self.n), (self.n, self.n)).into_owned()
    }

    pub fn c(&self) -> RealMatrix {
        self.m.view((self.n, 0), (self.n, self.n)).into_owned()
    }

    pub fn d(&self) -> RealMatrix {
        self.m.view((self.n, self.n), (self.n, self.n)).into_owned()
    }

    /// Product `self * other`; symplectic by closure of the group.
    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        assert_eq!(self.n, other.n, "compose: dimension mismatch");
        Self::from_matrix_unchecked(&self.m * &other.m)
    }

    /// `H⁻¹ = [[Dᵀ, -Bᵀ], [-Cᵀ, Aᵀ]]`.
    pub fn inverse(&self) -> SymplecticMatrix {
        let inv = assemble_blocks(
            &self.d().transpose(),
            &(-self.b().transpose()),
            &(-self.c().transpose()),
            &self.a().transpose(),
        );
        Self::from_matrix_unchecked(inv)
    }

    pub fn transpose(&self) -> SymplecticMatrix {
        Self::from_matrix_unchecked(self.m.transpose())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }
}

/// The standard structure matrix `J` as a symplectic matrix.
pub fn standard_j(n: usize) -> SymplecticMatrix {
    SymplecticMatrix::from_matrix_unchecked(j_matrix(n))
}

/// `sp_inverse` as a free function.
pub fn sp_inverse(h: &SymplecticMatrix) -> SymplecticMatrix {
    h.inverse()
}

/// `‖MᵀJM − J‖_F / max(1, ‖M‖_F²)`.
pub fn symplectic_residual(m: &RealMatrix) -> f64 {
    let n = m.nrows() / 2;
    let j = j_matrix(n);
    let r = m.transpose() * &j * m - &j;
    r.norm() / m.norm_squared().max(1.0)
}

/// One row of a [`SymplecticityReport`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EquivalenceCheck {
    pub label: String,
    pub residual: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymplecticityReport {
    pub symplectic: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Each characterisation of symplecticity evaluated independently.
    pub equivalences: Vec<EquivalenceCheck>,
    /// True when every equivalence reached the same verdict as `symplectic`.
    pub consistent: bool,
}

/// Checks `MᵀJM = J` and the equivalent characterisations: the inverse
/// formula, `Mᵀ` symplectic, and both sets of block identities.
pub fn is_symplectic(m: &RealMatrix, tol: f64) -> Result<SymplecticityReport> {
    let n = half_dim(m)?;
    let scale = m.norm_squared().max(1.0);
    let j = j_matrix(n);
    let id = RealMatrix::identity(2 * n, 2 * n);
    let idn = RealMatrix::identity(n, n);
    let a = m.view((0, 0), (n, n)).into_owned();
    let b = m.view((0, n), (n, n)).into_owned();
    let c = m.view((n, 0), (n, n)).into_owned();
    let d = m.view((n, n), (n, n)).into_owned();

    let residual = (m.transpose() * &j * m - &j).norm() / scale;

    let inv_formula = assemble_blocks(&d.transpose(), &(-b.transpose()), &(-c.transpose()), &a.transpose());
    let r_inverse = (m * &inv_formula - &id).norm() / scale;
    let r_transpose = (m * &j * m.transpose() - &j).norm() / scale;
    let r_cols = ((a.transpose() * &d - c.transpose() * &b - &idn).norm()
        + (a.transpose() * &c - c.transpose() * &a).norm()
        + (b.transpose() * &d - d.transpose() * &b).norm())
        / scale;
    let r_rows = ((&a * d.transpose() - &b * c.transpose() - &idn).norm()
        + (&a * b.transpose() - &b * a.transpose()).norm()
        + (&c * d.transpose() - &d * c.transpose()).norm())
        / scale;

    let symplectic = residual <= tol;
    let equivalences: Vec<EquivalenceCheck> = [
        ("H^T J H = J", residual),
        ("H^-1 = [[D^T, -B^T], [-C^T, A^T]]", r_inverse),
        ("H^T symplectic", r_transpose),
        ("A^T D - C^T B = I, A^T C sym, B^T D sym", r_cols),
        ("A D^T - B C^T = I, A B^T sym, C D^T sym", r_rows),
    ]
    .into_iter()
    .map(|(label, r)| EquivalenceCheck { label: label.to_string(), residual: r, holds: r <= tol })
    .collect();
    let consistent = equivalences.iter().all(|e| e.holds == symplectic);
    Ok(SymplecticityReport { symplectic, residual, tolerance: tol, equivalences, consistent })
}

/// An element of the symplectic Lie algebra: `JX + XᵀJ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpAlgebraElement {
    n: usize,
    m: RealMatrix,
}

impl SpAlgebraElement {
    /// Number of independent coordinates, `n(2n + 1)`.
    pub fn dimension(n: usize) -> usize {
        n * (2 * n + 1)
    }

    pub fn zero(n: usize) -> Self {
        SpAlgebraElement { n, m: RealMatrix::zeros(2 * n, 2 * n) }
    }

    /// Validates `JX + XᵀJ = 0` within [`SYMPLECTIC_TOL`] relative to `max(1, ‖X‖)`.
    pub fn new(m: RealMatrix) -> Result<Self> {
        let n = half_dim(&m)?;
        let j = j_matrix(n);
        let r = (&j * &m + m.transpose() * &j).norm() / m.norm().max(1.0);
        if r > SYMPLECTIC_TOL {
            return Err(Error::Precondition(format!("not in sp(2n): residual {r:.3e}")));
        }
        Ok(SpAlgebraElement { n, m })
    }

    /// Orthogonal (Frobenius) projection `(X + J Xᵀ J) / 2` onto the algebra.
    pub fn project(m: &RealMatrix) -> Result<Self> {
        let n = half_dim(m)?;
        let j = j_matrix(n);
        let p = (m + &j * m.transpose() * &j) * 0.5;
        Ok(SpAlgebraElement { n, m: p })
    }

    /// Builds `[[α, β], [γ, -αᵀ]]` from coordinates in the canonical basis:
    /// `n²` entries of `α` row-major, then the upper triangles of the
    /// symmetric `β` and `γ`.
    pub fn from_coords(n: usize, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), Self::dimension(n), "coordinate count");
        let mut m = RealMatrix::zeros(2 * n, 2 * n);
        let mut it = coords.iter().copied();
        for i in 0..n {
            for j in 0..n {
                let v = it.next().unwrap();
                m[(i, j)] = v;
                m[(n + j, n + i)] = -v;
            }
        }
        for off in [(0, n), (n, 0)] {
            for i in 0..n {
                for j in i..n {
                    let v = it.next().unwrap();
                    m[(off.0 + i, off.1 + j)] = v;
                    m[(off.0 + j, off.1 + i)] = v;
                }
            }
        }
        SpAlgebraElement { n, m }
    }

    /// Derivative of [`from_coords`](Self::from_coords) applied to a matrix
    /// gradient: the Frobenius pairing of `g` with each basis generator.
    pub fn coords_of_gradient(n: usize, g: &RealMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::dimension(n));
        for i in 0..n {
            for j in 0..n {
                out.push(g[(i, j)] - g[(n + j, n + i)]);
            }
        }
        for off in [(0, n), (n, 0)] {
            for i in 0..n {
                for j in i..n {
                    if i == j {
                        out.push(g[(off.0 + i, off.1 + i)]);
                    } else {
                        out.push(g[(off.0 + i, off.1 + j)] + g[(off.0 + j, off.1 + i)]);
                    }
                }
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.m
    }

    /// `exp(X)`, which lies in Sp(2n, R).
    pub fn exp(&self) -> SymplecticMatrix {
        SymplecticMatrix::from_matrix_unchecked(expm(&self.m))
    }

    /// Residual `‖JX + XᵀJ‖_F`.
    pub fn algebra_residual(&self) -> f64 {
        let j = j_matrix(self.n);
        (&j * &self.m + self.m.transpose() * &j).norm()
    }
}

/// A skew-symmetric matrix; storage is antisymmetrised on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    m: RealMatrix,
}

impl SkewMatrix {
    /// Stores `(M − Mᵀ) / 2`.
    pub fn from_matrix(m: &RealMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        Ok(SkewMatrix { m: (m - m.transpose()) * 0.5 })
    }

    pub fn zeros(dim: usize) -> Self {
        SkewMatrix { m: RealMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.m
    }

    /// Gaussian entries above the diagonal, scaled to unit Frobenius norm.
    pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let normal = rand_distr::StandardNormal;
        let mut m = RealMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i + 1..dim {
                let v: f64 = rng.sample(normal);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        let norm = m.norm();
        if norm > 0.0 {
            m /= norm;
        }
        SkewMatrix { m }
    }
}

/// Which family [`sample_symplectic`] draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SampleSpec {
    /// `exp(X₁) exp(X₂)` with algebra coordinates uniform in `[-1, 1]`.
    Generic,
    /// Interleaved direct sum of `n` planar blocks, `rank` of them rotations
    /// and the rest lower shears, so `rank(B) = rank` exactly.
    SingularB { rank: usize },
    /// The rank witness `H_k`.
    Witness { k: usize },
    /// A `SingularB` sample multiplied on both sides by random block-diagonal
    /// and shear factors that leave `rank(B)` unchanged but fill every block.
    MixedSingularB { rank: usize },
}

pub fn sample_symplectic(n: usize, seed: u64, spec: SampleSpec) -> Result<SymplecticMatrix> {
    let mut rng = seeded_rng(seed);
    sample_symplectic_with(n, &mut rng, spec)
}

pub fn sample_symplectic_with<R: Rng>(n: usize, rng: &mut R, spec: SampleSpec) -> Result<SymplecticMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    match spec {
        SampleSpec::Generic => {
            let a1 = random_algebra_element(n, rng, 1.0);
            let a2 = random_algebra_element(n, rng, 1.0);
            Ok(a1.exp().compose(&a2.exp()))
        }
        SampleSpec::SingularB { rank } => {
            if rank > n {
                return Err(Error::InvalidParameter(format!("rank {rank} exceeds n = {n}")));
            }
            Ok(planar_direct_sum(n, rank, rng))
        }
        SampleSpec::Witness { k } => witness_hk(n, k),
        SampleSpec::MixedSingularB { rank } => {
            if rank > n {
                return Err(Error::InvalidParameter(format!("rank {rank} exceeds n = {n}")));
            }
            let core = planar_direct_sum(n, rank, rng);
            let left = block_diag_factor(n, rng).compose(&lower_shear_factor(n, rng));
            let right = lower_shear_factor(n, rng).compose(&block_diag_factor(n, rng));
            Ok(left.compose(&core).compose(&right))
        }
    }
}

/// Random algebra element with canonical coordinates uniform in `[-scale, scale]`.
pub fn random_algebra_element<R: Rng>(n: usize, rng: &mut R, scale: f64) -> SpAlgebraElement {
    let coords: Vec<f64> = (0..SpAlgebraElement::dimension(n))
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    SpAlgebraElement::from_coords(n, &coords)
}

fn planar_direct_sum<R: Rng>(n: usize, rank: usize, rng: &mut R) -> SymplecticMatrix {
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(rng);
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    for (pos, &j) in slots.iter().enumerate() {
        let blk = if pos < rank {
            // Angles bounded away from multiples of π keep sin(t) ≠ 0.
            let mut t: f64 = rng.random_range(0.2..std::f64::consts::PI - 0.2);
            if rng.random_bool(0.5) {
                t = -t;
            }
            [t.cos(), -t.sin(), t.sin(), t.cos()]
        } else {
            let c: f64 = rng.random_range(-1.0..=1.0);
            [1.0, 0.0, c, 1.0]
        };
        m[(j, j)] = blk[0];
        m[(j, n + j)] = blk[1];
        m[(n + j, j)] = blk[2];
        m[(n + j, n + j)] = blk[3];
    }
    SymplecticMatrix::from_matrix_unchecked(m)
}

/// `[[P, 0], [0, P⁻ᵀ]]` with `P = exp(G)`, `G` uniform in `[-0.5, 0.5]`.
fn block_diag_factor<R: Rng>(n: usize, rng: &mut R) -> SymplecticMatrix {
    let g = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..=0.5));
    let p = expm(&g);
    let p_inv_t = expm(&(-g.transpose()));
    let z = RealMatrix::zeros(n, n);
    SymplecticMatrix::from_matrix_unchecked(assemble_blocks(&p, &z, &z, &p_inv_t))
}

/// `[[I, 0], [S, I]]` with `S` symmetric, entries uniform in `[-1, 1]`.
fn lower_shear_factor<R: Rng>(n: usize, rng: &mut R) -> SymplecticMatrix {
    let mut s = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..=1.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let id = RealMatrix::identity(n, n);
    let z = RealMatrix::zeros(n, n);
    SymplecticMatrix::from_matrix_unchecked(assemble_blocks(&id, &z, &s, &id))
}

/// `H_k(x', x'', ξ', ξ'') = (x', -ξ'', ξ', x'')` with `x', ξ' ∈ Rᵏ`.
/// `H_n` is the identity and `H_0` is `J`.
pub fn witness_hk(n: usize, k: usize) -> Result<SymplecticMatrix> {
    if n == 0 || k > n {
        return Err(Error::InvalidParameter(format!("witness needs 0 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..k {
        m[(i, i)] = 1.0;
        m[(n + i, n + i)] = 1.0;
    }
    for i in k..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    Ok(SymplecticMatrix::from_matrix_unchecked(m))
}

/// `[[cos t I, -sin t I], [sin t I, cos t I]]`.
pub fn rotation(n: usize, t: f64) -> SymplecticMatrix {
    let id = RealMatrix::identity(n, n);
    SymplecticMatrix::from_matrix_unchecked(assemble_blocks(
        &(&id * t.cos()),
        &(&id * -t.sin()),
        &(&id * t.sin()),
        &(&id * t.cos()),
    ))
}

/// A point `(z, ζ)` of `Cⁿ × Cⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGraphPoint {
    pub z: ComplexVector,
    pub zeta: ComplexVector,
}

impl ComplexGraphPoint {
    pub fn new(z: ComplexVector, zeta: ComplexVector) -> Result<Self> {
        if z.len() != zeta.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), found: zeta.len() });
        }
        if z.iter().chain(zeta.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("graph point"));
        }
        Ok(ComplexGraphPoint { z, zeta })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }
}

/// `ω((z, ζ), (w, ζ')) = Σ_j (ζ_j w_j − z_j ζ'_j)`, complex bilinear.
pub fn omega_complex(p: &ComplexGraphPoint, q: &ComplexGraphPoint) -> Complex64 {
    assert_eq!(p.n(), q.n(), "omega_complex: dimension mismatch");
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..p.n() {
        acc += p.zeta[j] * q.z[j] - p.z[j] * q.zeta[j];
    }
    acc
}

/// `(x + i(Ax + Bξ), ξ + i(Cx + Dξ))`.
pub fn graph_embed(h: &SymplecticMatrix, x: &DVector<f64>, xi: &DVector<f64>) -> ComplexGraphPoint {
    let n = h.n();
    assert!(x.len() == n && xi.len() == n, "graph_embed: dimension mismatch");
    let y = h.a() * x + h.b() * xi;
    let eta = h.c() * x + h.d() * xi;
    let z = ComplexVector::from_fn(n, |i, _| Complex64::new(x[i], y[i]));
    let zeta = ComplexVector::from_fn(n, |i, _| Complex64::new(xi[i], eta[i]));
    ComplexGraphPoint { z, zeta }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_for_n1_is_quarter_turn() {
        let j = standard_j(1);
        assert_eq!(j.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn j_for_n2_block_layout() {
        let j = j_matrix(2);
        assert_eq!(j.view((0, 2), (2, 2)).into_owned(), -RealMatrix::identity(2, 2));
        assert_eq!(j.view((2, 0), (2, 2)).into_owned(), RealMatrix::identity(2, 2));
        assert_eq!(j.view((0, 0), (2, 2)).into_owned(), RealMatrix::zeros(2, 2));
    }

    #[test]
    fn j_squares_to_minus_identity() {
        for n in 1..=5 {
            let j = j_matrix(n);
            assert_eq!(&j * &j, -RealMatrix::identity(2 * n, 2 * n));
            assert_eq!(symplectic_residual(&j), 0.0);
        }
    }

    #[test]
    fn identity_is_symplectic_with_zero_residual() {
        let r = is_symplectic(&RealMatrix::identity(4, 4), 1e-10).unwrap();
        assert!(r.symplectic && r.consistent);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn j_is_symplectic() {
        let r = is_symplectic(&j_matrix(3), 1e-10).unwrap();
        assert!(r.symplectic && r.consistent);
    }

    #[test]
    fn diag_two_one_is_not_symplectic() {
        // Mᵀ J M = 2 J for diag(2, 1).
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let r = is_symplectic(&m, 1e-10).unwrap();
        assert!(!r.symplectic);
        assert!(r.consistent);
        let jj = m.transpose() * j_matrix(1) * &m;
        assert_eq!(jj, j_matrix(1) * 2.0);
    }

    #[test]
    fn odd_dimension_is_rejected() {
        assert!(matches!(is_symplectic(&RealMatrix::identity(3, 3), 1e-10), Err(Error::OddDimension(3))));
    }

    #[test]
    fn inverse_of_j_is_minus_j() {
        let inv = sp_inverse(&standard_j(2));
        assert_eq!(inv.matrix(), &(-j_matrix(2)));
    }

    #[test]
    fn inverse_of_upper_shear() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        let id = RealMatrix::identity(2, 2);
        let z = RealMatrix::zeros(2, 2);
        let h = SymplecticMatrix::from_blocks(&id, &b, &z, &id).unwrap();
        let expected = assemble_blocks(&id, &(-&b), &z, &id);
        assert_eq!(h.inverse().matrix(), &expected);
    }

    #[test]
    fn inverse_matches_lu_solve() {
        let h = sample_symplectic(3, 11, SampleSpec::Generic).unwrap();
        let lu = h.matrix().clone().lu().try_inverse().unwrap();
        let scale = h.frobenius_norm().powi(2);
        assert!((h.inverse().matrix() - lu).norm() / scale < 1e-10);
        let prod = h.inverse().matrix() * h.matrix();
        assert!((prod - RealMatrix::identity(6, 6)).norm() / scale < 1e-10);
    }

    #[test]
    fn generic_sample_passes_invariant() {
        let h = sample_symplectic(3, 7, SampleSpec::Generic).unwrap();
        assert!(symplectic_residual(h.matrix()) < 1e-9);
    }

    #[test]
    fn singular_b_rank_zero_has_zero_b() {
        let h = sample_symplectic(2, 5, SampleSpec::SingularB { rank: 0 }).unwrap();
        assert_eq!(h.b(), RealMatrix::zeros(2, 2));
    }

    #[test]
    fn singular_b_has_exact_rank() {
        for n in 1..=5 {
            for r in 0..=n {
                for spec in [SampleSpec::SingularB { rank: r }, SampleSpec::MixedSingularB { rank: r }] {
                    let h = sample_symplectic(n, 100 + r as u64, spec).unwrap();
                    assert_eq!(crate::linalg::rank(&h.b()), r, "{spec:?} n={n}");
                    assert!(symplectic_residual(h.matrix()) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn invalid_rank_rejected() {
        assert!(sample_symplectic(2, 0, SampleSpec::SingularB { rank: 3 }).is_err());
        assert!(sample_symplectic(2, 0, SampleSpec::Witness { k: 3 }).is_err());
    }

    #[test]
    fn samples_are_bit_reproducible() {
        let a = sample_symplectic(3, 42, SampleSpec::Generic).unwrap();
        let b = sample_symplectic(3, 42, SampleSpec::Generic).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn witness_extremes() {
        assert_eq!(witness_hk(3, 3).unwrap(), SymplecticMatrix::identity(3));
        assert_eq!(witness_hk(3, 0).unwrap(), standard_j(3));
        // rank(B) = n - k
        assert_eq!(crate::linalg::rank(&witness_hk(4, 1).unwrap().b()), 3);
    }

    #[test]
    fn omega_single_term() {
        let p = ComplexGraphPoint::new(
            ComplexVector::from_element(1, Complex64::new(1.0, 0.0)),
            ComplexVector::from_element(1, Complex64::new(0.0, 0.0)),
        )
        .unwrap();
        let q = ComplexGraphPoint::new(
            ComplexVector::from_element(1, Complex64::new(0.0, 0.0)),
            ComplexVector::from_element(1, Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        assert_eq!(omega_complex(&p, &q), Complex64::new(-1.0, 0.0));
        assert_eq!(omega_complex(&p, &p), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn embed_identity_and_j() {
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let xi = DVector::from_vec(vec![0.5, 3.0]);
        let p = graph_embed(&SymplecticMatrix::identity(2), &x, &xi);
        for i in 0..2 {
            assert_eq!(p.z[i], Complex64::new(x[i], x[i]));
            assert_eq!(p.zeta[i], Complex64::new(xi[i], xi[i]));
        }
        let p = graph_embed(&standard_j(2), &x, &xi);
        for i in 0..2 {
            assert_eq!(p.z[i], Complex64::new(x[i], -xi[i]));
            assert_eq!(p.zeta[i], Complex64::new(xi[i], x[i]));
        }
    }

    #[test]
    fn embedded_points_are_real_lagrangian() {
        let mut rng = seeded_rng(9);
        let h = sample_symplectic(3, 9, SampleSpec::Generic).unwrap();
        let normal = rand_distr::StandardNormal;
        for _ in 0..20 {
            let v: Vec<f64> = (0..12).map(|_| rng.sample(normal)).collect();
            let p = graph_embed(&h, &DVector::from_column_slice(&v[0..3]), &DVector::from_column_slice(&v[3..6]));
            let q = graph_embed(&h, &DVector::from_column_slice(&v[6..9]), &DVector::from_column_slice(&v[9..12]));
            let w = omega_complex(&p, &q);
            let scale = h.frobenius_norm().powi(2) * 10.0;
            assert!(w.re.abs() < 1e-12 * scale, "Re ω = {}", w.re);
        }
    }

    #[test]
    fn algebra_coordinates_roundtrip_through_gradient_pairing() {
        // coords_of_gradient is the adjoint of from_coords.
        let n = 2;
        let mut rng = seeded_rng(3);
        let g = RealMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let dim = SpAlgebraElement::dimension(n);
        let pulled = SpAlgebraElement::coords_of_gradient(n, &g);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            let basis = SpAlgebraElement::from_coords(n, &e);
            let direct = crate::linalg::frob_dot(&g, basis.matrix());
            assert!((direct - pulled[i]).abs() < 1e-14);
            assert!(basis.algebra_residual() == 0.0);
        }
    }

    #[test]
    fn projection_lands_in_algebra_and_is_idempotent() {
        let mut rng = seeded_rng(4);
        let m = RealMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let p = SpAlgebraElement::project(&m).unwrap();
        assert!(p.algebra_residual() < 1e-14);
        let pp = SpAlgebraElement::project(p.matrix()).unwrap();
        assert!((pp.matrix() - p.matrix()).norm() < 1e-15);
    }
}
