//! Quadratic generating functions for the complexified graph of a linear
//! symplectomorphism.
//!
//! For `H = [[A, B], [C, D]]` the complexified graph is the real subspace
//! `{(x + i(Ax + Bξ), ξ + i(Cx + Dξ))}` of `Cⁿ × Cⁿ`. We build a real
//! quadratic form `Φ(z, θ)` such that
//!
//! ```text
//! graph_C H = {(z, −2 ∂Φ/∂z (z, θ)) : ∂Φ/∂θ (z, θ) = 0}.
//! ```
//!
//! When `B` is invertible no auxiliary variables are needed and `Φ` is the
//! classical generating function in `(p, q) = (Re z, Im z)`. Otherwise we
//! pick an orthonormal basis `b` adapted to `ker B`, dual vectors `β`, and
//! a symplectic basis of `R⁴ⁿ` in which the graph is `t' = 0, θ'' = f''(t'')`,
//! then pull the phase `θ'·t' + F(t'') + |θ'' − f''(t'')|²` back to `z`.
//!
//! `Φ` is stored as a symmetric matrix `Q` acting on `v = (p, q, θ', θ'')`,
//! `Φ(v) = ½ vᵀ Q v`. Vectors in `R⁴ⁿ` are ordered `(Re z, Re ζ, Im z, Im ζ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, normalize_signs, rank_threshold, SortedSvd};
use crate::symplectic::{
    graph_embed, omega_complex, seeded_rng, ComplexGraphPoint, ComplexVector, RealMatrix, SymplecticMatrix,
};
use crate::xmap::xmap;

/// `σ_min(B) / σ_max(B)` at or below which `B` is treated as singular by the
/// direct formula.
pub const SINGULAR_B_RATIO: f64 = 1e-8;
/// Ratio below which [`build_genfun`] prefers the general construction.
pub const DISPATCH_RATIO: f64 = 1e-6;
/// Condition number above which the dual-vector system is rejected.
pub const MAX_BASIS_CONDITION: f64 = 1e12;
pub const BASIS_TOL: f64 = 1e-10;
pub const INVERSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `det B ≠ 0`; `Φ` depends on `z` only.
    Invertible,
    /// Auxiliary variables `θ = (θ', θ'') ∈ Rᵏ × R²ⁿ⁻ᵏ`.
    General,
}

/// Symplectic basis of `(R⁴ⁿ, Re ω)` adapted to `ker B`.
#[derive(Debug, Clone)]
pub struct SymplecticBasisData {
    pub n: usize,
    pub k: usize,
    /// Orthonormal columns; the first `k` span `ker B`.
    pub b: RealMatrix,
    /// Columns `β_{k+1}, …, β_n`.
    pub beta: RealMatrix,
    /// `4n x 2n`: `(0,0;Ab_j,0)` for `j ≤ k`, `(0,0;Bb_j,0)` for `j > k`,
    /// then `(b_j,0;Ab_j,0)` for all `j`.
    pub horizontal: RealMatrix,
    /// `4n x 2n` duals: `(0,b_j;0,Db_j)`, `(0,Aᵀβ_j;0,β_j)`, `(0,−b_j;0,0)`.
    pub vertical: RealMatrix,
    /// Largest deviation of the `Re ω` Gram matrix from the standard one.
    pub gram_residual: f64,
    /// Largest deviation in the defining conditions of the `β_j`.
    pub beta_residual: f64,
}

/// Intermediate coefficient data of the general construction.
#[derive(Debug, Clone)]
pub struct PhiAuxiliary {
    /// Jacobian of `f''`: `f''(t'') = G t''`, and `F(t'') = ½ t''ᵀ G t''`.
    pub f_jacobian: RealMatrix,
    /// `2n x 2n`: rows give `(t', t'')` as linear functions of `(Re z, Im z)`.
    pub t_of_z: RealMatrix,
    /// The left-hand matrix of the linear graph conditions on `(t', θ'')`.
    pub condition_matrix: RealMatrix,
    /// The explicit inverse written in terms of `b`, `Π` and the blocks.
    pub condition_inverse: RealMatrix,
    pub inverse_residual: f64,
    pub symmetry_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub basis: SymplecticBasisData,
    pub aux: PhiAuxiliary,
}

/// `Φ(p, q, θ) = ½ vᵀ Q v` with `v = (p, q, θ', θ'')`.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    n: usize,
    k: usize,
    q: RealMatrix,
    b: RealMatrix,
    beta: RealMatrix,
    construction: Option<Box<Construction>>,
}

impl GeneratingFunction {
    /// Rebuilds a generating function from stored data (no construction
    /// diagnostics). `q` must be `2n x 2n` or `4n x 4n` and symmetric.
    pub fn from_parts(n: usize, k: usize, q: RealMatrix, b: RealMatrix, beta: RealMatrix) -> Result<Self> {
        let d = q.nrows();
        if !q.is_square() || (d != 2 * n && d != 4 * n) {
            return Err(Error::DimensionMismatch { expected: 4 * n, found: d });
        }
        if k > n {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
        }
        if d == 2 * n && k != 0 {
            return Err(Error::InvalidParameter("a theta-free phase must have k = 0".into()));
        }
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidParameter(format!("Q is not symmetric (deviation {asym:.3e})")));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(GeneratingFunction { n, k, q, b, beta, construction: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> &RealMatrix {
        &self.q
    }

    pub fn b(&self) -> &RealMatrix {
        &self.b
    }

    pub fn beta(&self) -> &RealMatrix {
        &self.beta
    }

    pub fn construction(&self) -> Option<&Construction> {
        self.construction.as_deref()
    }

    pub fn theta_dim(&self) -> usize {
        self.q.nrows() - 2 * self.n
    }

    pub fn branch(&self) -> Branch {
        if self.theta_dim() == 0 {
            Branch::Invertible
        } else {
            Branch::General
        }
    }

    /// `Q` padded with zero auxiliary blocks to the uniform `4n x 4n` shape.
    pub fn padded_q(&self) -> RealMatrix {
        if self.theta_dim() == 2 * self.n {
            return self.q.clone();
        }
        let mut p = RealMatrix::zeros(4 * self.n, 4 * self.n);
        p.view_mut((0, 0), (2 * self.n, 2 * self.n)).copy_from(&self.q);
        p
    }

    fn theta_view<'a>(&self, theta: &'a DVector<f64>) -> Result<DVector<f64>> {
        let td = self.theta_dim();
        if theta.len() == td {
            Ok(theta.clone())
        } else if td == 0 && theta.len() == 2 * self.n {
            // Uniform-shape callers pad with inert auxiliary variables.
            Ok(DVector::zeros(0))
        } else {
            Err(Error::DimensionMismatch { expected: td, found: theta.len() })
        }
    }

    fn stack(&self, z: &ComplexVector, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: z.len() });
        }
        let theta = self.theta_view(theta)?;
        let n = self.n;
        let mut v = DVector::zeros(2 * n + theta.len());
        for i in 0..n {
            v[i] = z[i].re;
            v[n + i] = z[i].im;
        }
        v.rows_mut(2 * n, theta.len()).copy_from(&theta);
        Ok(v)
    }

    fn blocks(&self) -> PhiBlocks {
        PhiBlocks::new(&self.q, self.n)
    }
}

/// Sub-blocks of `Q` by variable group.
struct PhiBlocks {
    n: usize,
    td: usize,
    pp: RealMatrix,
    pq: RealMatrix,
    qp: RealMatrix,
    qq: RealMatrix,
    p_theta: RealMatrix,
    q_theta: RealMatrix,
    theta_w: RealMatrix,
    theta_theta: RealMatrix,
}

impl PhiBlocks {
    fn new(q: &RealMatrix, n: usize) -> Self {
        let td = q.nrows() - 2 * n;
        PhiBlocks {
            n,
            td,
            pp: q.view((0, 0), (n, n)).into_owned(),
            pq: q.view((0, n), (n, n)).into_owned(),
            qp: q.view((n, 0), (n, n)).into_owned(),
            qq: q.view((n, n), (n, n)).into_owned(),
            p_theta: q.view((0, 2 * n), (n, td)).into_owned(),
            q_theta: q.view((n, 2 * n), (n, td)).into_owned(),
            theta_w: q.view((2 * n, 0), (td, 2 * n)).into_owned(),
            theta_theta: q.view((2 * n, 2 * n), (td, td)).into_owned(),
        }
    }

    /// `∂²Φ/∂z∂θ = ½(Q_pθ − i Q_qθ)`.
    fn z_theta(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.td, |j, l| Complex64::new(0.5 * self.p_theta[(j, l)], -0.5 * self.q_theta[(j, l)]))
    }

    /// `∂²Φ/∂z∂z̄ = ¼(Q_pp + Q_qq + i(Q_pq − Q_qp))`.
    fn z_zbar(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |j, m| {
            Complex64::new(
                0.25 * (self.pp[(j, m)] + self.qq[(j, m)]),
                0.25 * (self.pq[(j, m)] - self.qp[(j, m)]),
            )
        })
    }

    /// `∂²Φ/∂z∂z = ¼(Q_pp − Q_qq − i(Q_pq + Q_qp))`.
    fn z_z(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |j, m| {
            Complex64::new(
                0.25 * (self.pp[(j, m)] - self.qq[(j, m)]),
                -0.25 * (self.pq[(j, m)] + self.qp[(j, m)]),
            )
        })
    }
}

/// Orthonormal basis of `Rⁿ` whose first `k` columns span `ker B`.
///
/// Kernel vectors come from the right singular vectors with
/// `σ ≤ 1e-8 σ_max`; each column is signed so its first nonzero entry is
/// positive. `B = 0` returns the identity.
pub fn kernel_basis(b: &RealMatrix) -> (RealMatrix, usize) {
    let n = b.nrows();
    let svd = SortedSvd::new(b);
    let rank = svd.rank();
    if rank == 0 {
        return (RealMatrix::identity(n, n), n);
    }
    let k = n - rank;
    let mut basis = RealMatrix::zeros(n, n);
    for i in 0..k {
        basis.set_column(i, &svd.v.column(rank + i));
    }
    for i in 0..rank {
        basis.set_column(k + i, &svd.v.column(i));
    }
    normalize_signs(&mut basis);
    (basis, k)
}

/// Dual vectors `β_J`, `J = k+1..n`: `β_J ⊥ Ab_i (i ≤ k)`, `β_J ⊥ Bb_j (j > k, j ≠ J)`
/// and `β_J · Bb_J = 1`. Returned as the columns of an `n x (n − k)` matrix,
/// together with the residual of those conditions.
pub fn beta_vectors(h: &SymplecticMatrix, b: &RealMatrix, k: usize) -> Result<(RealMatrix, f64)> {
    let n = h.n();
    if n == k {
        return Ok((RealMatrix::zeros(n, 0), 0.0));
    }
    let (a, bb) = (h.a(), h.b());
    let mut m = RealMatrix::zeros(n, n);
    for i in 0..n {
        let col = if i < k { &a * b.column(i) } else { &bb * b.column(i) };
        m.set_column(i, &col);
    }
    let svd = SortedSvd::new(&m);
    let cond = svd.sigma_max() / svd.sigma_min();
    if !cond.is_finite() || cond > MAX_BASIS_CONDITION {
        return Err(Error::Degenerate {
            stage: "beta_vectors",
            detail: format!(
                "{{Ab_1..Ab_k, Bb_(k+1)..Bb_n}} has condition number {cond:.3e} (k = {k}, sigma = {:?})",
                svd.singular_values
            ),
        });
    }
    let inv = m.clone().lu().try_inverse().ok_or_else(|| Error::Degenerate {
        stage: "beta_vectors",
        detail: "LU inverse failed".into(),
    })?;
    // Row J of M⁻¹ is the vector pairing to δ with the columns of M.
    let beta = inv.rows(k, n - k).transpose();

    // ker B ⟂ Aᵀβ_j  and  b_J · Bᵀβ_j = δ_Jj
    let perp = b.columns(0, k).transpose() * a.transpose() * &beta;
    let dual = b.columns(k, n - k).transpose() * bb.transpose() * &beta - RealMatrix::identity(n - k, n - k);
    let residual = perp.amax().max(dual.amax());
    Ok((beta, residual))
}

/// `Re ω(u, v) = ξ·x' − x·ξ' − η·y' + y·η'` on `R⁴ⁿ = (x, ξ, y, η)`.
pub fn re_omega(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() / 4;
    let part = |w: &DVector<f64>, i: usize| w.rows(i * n, n).into_owned();
    let (x, xi, y, eta) = (part(u, 0), part(u, 1), part(u, 2), part(u, 3));
    let (x2, xi2, y2, eta2) = (part(v, 0), part(v, 1), part(v, 2), part(v, 3));
    xi.dot(&x2) - x.dot(&xi2) - eta.dot(&y2) + y.dot(&eta2)
}

fn pack4(n: usize, x: &DVector<f64>, xi: &DVector<f64>, y: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(4 * n);
    v.rows_mut(0, n).copy_from(x);
    v.rows_mut(n, n).copy_from(xi);
    v.rows_mut(2 * n, n).copy_from(y);
    v.rows_mut(3 * n, n).copy_from(eta);
    v
}

/// Builds the horizontal/vertical families and validates all `Re ω` pairings.
pub fn assemble_symplectic_basis(
    h: &SymplecticMatrix,
    b: &RealMatrix,
    beta: &RealMatrix,
    k: usize,
    beta_residual: f64,
) -> Result<SymplecticBasisData> {
    let n = h.n();
    let (a, bb, d) = (h.a(), h.b(), h.d());
    let zero = DVector::<f64>::zeros(n);
    let mut horizontal = RealMatrix::zeros(4 * n, 2 * n);
    let mut vertical = RealMatrix::zeros(4 * n, 2 * n);
    for j in 0..n {
        let bj = b.column(j).into_owned();
        let (hcol, vcol) = if j < k {
            (pack4(n, &zero, &zero, &(&a * &bj), &zero), pack4(n, &zero, &bj, &zero, &(&d * &bj)))
        } else {
            let beta_j = beta.column(j - k).into_owned();
            (
                pack4(n, &zero, &zero, &(&bb * &bj), &zero),
                pack4(n, &zero, &(a.transpose() * &beta_j), &zero, &beta_j),
            )
        };
        horizontal.set_column(j, &hcol);
        vertical.set_column(j, &vcol);
        horizontal.set_column(n + j, &pack4(n, &bj, &zero, &(&a * &bj), &zero));
        vertical.set_column(n + j, &pack4(n, &zero, &(-&bj), &zero, &zero));
    }

    let mut gram_residual: f64 = 0.0;
    for i in 0..2 * n {
        let hi = horizontal.column(i).into_owned();
        let vi = vertical.column(i).into_owned();
        for j in 0..2 * n {
            let hj = horizontal.column(j).into_owned();
            let vj = vertical.column(j).into_owned();
            let expected = if i == j { 1.0 } else { 0.0 };
            gram_residual = gram_residual
                .max((re_omega(&hi, &vj) - expected).abs())
                .max(re_omega(&hi, &hj).abs())
                .max(re_omega(&vi, &vj).abs());
        }
    }
    let scale = h.frobenius_norm().powi(2).max(1.0) * beta.amax().max(1.0);
    if gram_residual > BASIS_TOL * scale {
        return Err(Error::Degenerate {
            stage: "assemble_symplectic_basis",
            detail: format!("Re omega Gram matrix off by {gram_residual:.3e}"),
        });
    }
    Ok(SymplecticBasisData {
        n,
        k,
        b: b.clone(),
        beta: beta.clone(),
        horizontal,
        vertical,
        gram_residual,
        beta_residual,
    })
}

/// Builds `Φ` from the adapted basis: validates the graph conditions and
/// their explicit inverse, forms `f''`, `F`, the phase in `(t, θ)` and pulls
/// it back through `t(z)`.
pub fn assemble_phi(h: &SymplecticMatrix, basis: SymplecticBasisData) -> Result<GeneratingFunction> {
    let n = h.n();
    let k = basis.k;
    let m = n - k;
    let (a, bb, c, d) = (h.a(), h.b(), h.c(), h.d());
    let b = &basis.b;
    let beta = &basis.beta;
    let idn = RealMatrix::identity(n, n);

    // Graph conditions on (t', θ''_{k+1..n}, θ''_{n+1..2n}).
    let mut lhs = RealMatrix::zeros(2 * n, 2 * n);
    for j in 0..k {
        lhs.view_mut((0, j), (n, 1)).copy_from(&(&a * b.column(j)));
    }
    for j in 0..m {
        let bt_beta = bb.transpose() * beta.column(j);
        lhs.view_mut((0, k + j), (n, 1)).copy_from(&(-(&a * &bt_beta)));
        lhs.view_mut((n, k + j), (n, 1)).copy_from(&(-(&c * &bt_beta)));
    }
    for j in 0..n {
        lhs.view_mut((0, n + j), (n, 1)).copy_from(&(&bb * b.column(j)));
        lhs.view_mut((n, n + j), (n, 1)).copy_from(&(&d * b.column(j)));
    }

    // Explicit inverse, with Π the orthogonal projection onto ker B.
    let kb = b.columns(0, k);
    let proj = &kb * kb.transpose();
    let upper = &d * (&proj * c.transpose() * &bb - &idn);
    let lower = (&d * &proj * a.transpose() - &idn) * &c;
    let mut inverse = RealMatrix::zeros(2 * n, 2 * n);
    for j in 0..k {
        inverse.view_mut((j, 0), (1, n)).copy_from(&(&d * b.column(j)).transpose());
    }
    for j in k..n {
        inverse.view_mut((j, 0), (1, n)).copy_from(&(&upper * b.column(j)).transpose());
        inverse.view_mut((j, n), (1, n)).copy_from(&(&bb * b.column(j)).transpose());
    }
    for j in 0..n {
        inverse.view_mut((n + j, 0), (1, n)).copy_from(&(&lower * b.column(j)).transpose());
        inverse.view_mut((n + j, n), (1, n)).copy_from(&(&a * b.column(j)).transpose());
    }
    let inverse_residual = (&inverse * &lhs - RealMatrix::identity(2 * n, 2 * n)).amax();
    let inv_scale = (inverse.norm() * lhs.norm()).max(1.0);
    if inverse_residual > INVERSE_TOL * inv_scale {
        return Err(Error::Degenerate {
            stage: "assemble_phi",
            detail: format!("explicit inverse of the graph conditions is off by {inverse_residual:.3e}"),
        });
    }

    // f''(t'') = G t'' over the index set {k+1..n} ∪ {n+1..2n}.
    let bcols: Vec<DVector<f64>> = (0..n).map(|j| b.column(j).into_owned()).collect();
    let (ab, bbv, cb, db): (Vec<_>, Vec<_>, Vec<_>, Vec<_>) = (
        bcols.iter().map(|v| &a * v).collect(),
        bcols.iter().map(|v| &bb * v).collect(),
        bcols.iter().map(|v| &c * v).collect(),
        bcols.iter().map(|v| &d * v).collect(),
    );
    let tdim = 2 * n - k;
    let mut g = RealMatrix::zeros(tdim, tdim);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = bbv[k + i].dot(&db[k + j]);
        }
        for j in 0..n {
            g[(i, m + j)] = bbv[k + i].dot(&cb[j]);
        }
    }
    for i in 0..n {
        for j in 0..m {
            g[(m + i, j)] = cb[i].dot(&bbv[k + j]);
        }
        for j in 0..n {
            g[(m + i, m + j)] = ab[i].dot(&cb[j]);
        }
    }
    let symmetry_residual = (&g - g.transpose()).amax();
    if symmetry_residual > 1e-12 * g.amax().max(1.0) {
        return Err(Error::Degenerate {
            stage: "assemble_phi",
            detail: format!("Jacobian of f'' is not symmetric (deviation {symmetry_residual:.3e})"),
        });
    }
    let g = (&g + g.transpose()) * 0.5;

    // t(z): rows t'_j (j ≤ k), t''_j (j > k), t''_{n+j}; columns (Re z, Im z).
    let mut t_of_z = RealMatrix::zeros(2 * n, 2 * n);
    for j in 0..k {
        t_of_z.view_mut((j, 0), (1, n)).copy_from(&(-bcols[j].transpose()));
        t_of_z.view_mut((j, n), (1, n)).copy_from(&db[j].transpose());
    }
    for j in 0..m {
        let bj = beta.column(j);
        t_of_z.view_mut((k + j, 0), (1, n)).copy_from(&(-(a.transpose() * bj)).transpose());
        t_of_z.view_mut((k + j, n), (1, n)).copy_from(&bj.transpose());
    }
    for j in 0..n {
        t_of_z.view_mut((n + j, 0), (1, n)).copy_from(&bcols[j].transpose());
    }
    let t1 = t_of_z.rows(0, k).into_owned();
    let t2 = t_of_z.rows(k, tdim).into_owned();

    // φ = θ'·t' + ½ t''ᵀ G t'' + |θ'' − G t''|², with t = t(z).
    let g_t2 = &g * &t2;
    let dim = 4 * n;
    let mut q = RealMatrix::zeros(dim, dim);
    let ww = t2.transpose() * &g_t2 + g_t2.transpose() * &g_t2 * 2.0;
    q.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&ww);
    q.view_mut((0, 2 * n), (2 * n, k)).copy_from(&t1.transpose());
    q.view_mut((2 * n, 0), (k, 2 * n)).copy_from(&t1);
    q.view_mut((0, 2 * n + k), (2 * n, tdim)).copy_from(&(g_t2.transpose() * -2.0));
    q.view_mut((2 * n + k, 0), (tdim, 2 * n)).copy_from(&(&g_t2 * -2.0));
    q.view_mut((2 * n + k, 2 * n + k), (tdim, tdim)).copy_from(&(RealMatrix::identity(tdim, tdim) * 2.0));
    let q = (&q + q.transpose()) * 0.5;

    let aux = PhiAuxiliary {
        f_jacobian: g,
        t_of_z,
        condition_matrix: lhs,
        condition_inverse: inverse,
        inverse_residual,
        symmetry_residual,
    };
    Ok(GeneratingFunction {
        n,
        k,
        q,
        b: basis.b.clone(),
        beta: basis.beta.clone(),
        construction: Some(Box::new(Construction { basis, aux })),
    })
}

/// The general construction, valid for every `H` (forced even when `B` is
/// invertible, in which case `k = 0`).
pub fn build_genfun_general(h: &SymplecticMatrix) -> Result<GeneratingFunction> {
    let (b, k) = kernel_basis(&h.b());
    let (beta, beta_residual) = beta_vectors(h, &b, k)?;
    let scale = beta.amax().max(1.0) * h.frobenius_norm().max(1.0);
    if beta_residual > 1e-9 * scale {
        return Err(Error::Degenerate {
            stage: "beta_vectors",
            detail: format!("dual conditions violated by {beta_residual:.3e}"),
        });
    }
    let basis = assemble_symplectic_basis(h, &b, &beta, k, beta_residual)?;
    assemble_phi(h, basis)
}

fn b_inverse(h: &SymplecticMatrix) -> Result<RealMatrix> {
    let bb = h.b();
    let svd = SortedSvd::new(&bb);
    let ratio = svd.sigma_min() / svd.sigma_max().max(f64::MIN_POSITIVE);
    if ratio <= SINGULAR_B_RATIO {
        return Err(Error::SingularB { ratio });
    }
    bb.lu().try_inverse().ok_or(Error::SingularB { ratio })
}

/// `Φ(p, q) = ½ pᵀB⁻¹Ap − pᵀB⁻¹q + ½ qᵀDB⁻¹q`.
pub fn build_genfun_invertible(h: &SymplecticMatrix) -> Result<GeneratingFunction> {
    let n = h.n();
    let binv = b_inverse(h)?;
    let binv_a = &binv * h.a();
    let d_binv = h.d() * &binv;
    let scale = binv_a.amax().max(d_binv.amax()).max(1.0);
    let asym = (&binv_a - binv_a.transpose()).amax().max((&d_binv - d_binv.transpose()).amax());
    if asym > 1e-9 * scale {
        return Err(Error::Degenerate {
            stage: "build_genfun_invertible",
            detail: format!("B^-1 A or D B^-1 not symmetric (deviation {asym:.3e})"),
        });
    }
    let mut q = RealMatrix::zeros(2 * n, 2 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&((&binv_a + binv_a.transpose()) * 0.5));
    q.view_mut((0, n), (n, n)).copy_from(&(-&binv));
    q.view_mut((n, 0), (n, n)).copy_from(&(-binv.transpose()));
    q.view_mut((n, n), (n, n)).copy_from(&((&d_binv + d_binv.transpose()) * 0.5));
    let (b, _) = kernel_basis(&h.b());
    Ok(GeneratingFunction { n, k: 0, q, b, beta: RealMatrix::zeros(n, 0), construction: None })
}

/// Chooses the direct formula when `B` is comfortably invertible and the
/// general construction otherwise, then checks the graph identity.
pub fn build_genfun(h: &SymplecticMatrix) -> Result<GeneratingFunction> {
    let svd = SortedSvd::new(&h.b());
    let ratio = if svd.sigma_max() == 0.0 { 0.0 } else { svd.sigma_min() / svd.sigma_max() };
    let gf = if ratio > DISPATCH_RATIO { build_genfun_invertible(h)? } else { build_genfun_general(h)? };
    let residual = verify_graph(&gf, h, 0x5eed, 4)?;
    if residual > 1e-8 {
        return Err(Error::Degenerate {
            stage: "build_genfun",
            detail: format!("graph identity residual {residual:.3e}"),
        });
    }
    Ok(gf)
}

/// Coefficient matrix of `Φ(x, ξ) = ½ xᵀAᵀCx + xᵀCᵀBξ + ½ ξᵀBᵀDξ`.
pub fn genfun_xxi_form(h: &SymplecticMatrix) -> Result<RealMatrix> {
    b_inverse(h)?;
    let n = h.n();
    let (a, b, c, d) = (h.a(), h.b(), h.c(), h.d());
    let atc = a.transpose() * &c;
    let btd = b.transpose() * &d;
    let ctb = c.transpose() * &b;
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&((&atc + atc.transpose()) * 0.5));
    m.view_mut((0, n), (n, n)).copy_from(&ctb);
    m.view_mut((n, 0), (n, n)).copy_from(&ctb.transpose());
    m.view_mut((n, n), (n, n)).copy_from(&((&btd + btd.transpose()) * 0.5));
    Ok(m)
}

/// `Φ(z, θ)`. For a `θ`-free phase a `θ` of length `2n` is accepted and ignored.
pub fn phi_eval(gf: &GeneratingFunction, z: &ComplexVector, theta: &DVector<f64>) -> Result<f64> {
    let v = gf.stack(z, theta)?;
    Ok(0.5 * v.dot(&(&gf.q * &v)))
}

/// `(∂Φ/∂z, ∂Φ/∂θ)` with `∂/∂z = ½(∂/∂p − i ∂/∂q)`.
pub fn phi_grad(gf: &GeneratingFunction, z: &ComplexVector, theta: &DVector<f64>) -> Result<(ComplexVector, DVector<f64>)> {
    let v = gf.stack(z, theta)?;
    let g = &gf.q * &v;
    let n = gf.n;
    let dz = ComplexVector::from_fn(n, |i, _| Complex64::new(0.5 * g[i], -0.5 * g[n + i]));
    let dtheta = g.rows(2 * n, gf.theta_dim()).into_owned();
    let dtheta = if theta.len() == gf.theta_dim() { dtheta } else { DVector::zeros(theta.len()) };
    Ok((dz, dtheta))
}

/// `∂²Φ/∂z∂z̄` read off `Q`.
pub fn mixed_hessian(gf: &GeneratingFunction) -> DMatrix<Complex64> {
    gf.blocks().z_zbar()
}

/// Result of fitting auxiliary variables to a graph point.
#[derive(Debug, Clone)]
pub struct GraphFit {
    pub z: ComplexVector,
    pub theta: DVector<f64>,
    /// Norm of the stacked residual of `∂Φ/∂θ = 0` and `−2∂Φ/∂z = ζ`.
    pub residual: f64,
    /// `max(1, ‖H‖_F) · max(1, ‖(x, ξ)‖)`.
    pub scale: f64,
}

impl GraphFit {
    pub fn scaled_residual(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Embeds `(x, ξ)` into the complexified graph and solves, in least squares,
/// for `θ` with `∂Φ/∂θ(z, θ) = 0` and `−2∂Φ/∂z(z, θ) = ζ`.
pub fn graph_from_phi(gf: &GeneratingFunction, x: &DVector<f64>, xi: &DVector<f64>, h: &SymplecticMatrix) -> Result<GraphFit> {
    let n = gf.n;
    if h.n() != n || x.len() != n || xi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let point = graph_embed(h, x, xi);
    let blk = gf.blocks();
    let td = blk.td;
    let mut w = DVector::zeros(2 * n);
    for i in 0..n {
        w[i] = point.z[i].re;
        w[n + i] = point.z[i].im;
    }
    let qw_p = gf.q.view((0, 0), (n, 2 * n)) * &w;
    let qw_q = gf.q.view((n, 0), (n, 2 * n)) * &w;

    // [Q_θθ; −Q_pθ; Q_qθ] θ = [−Q_θw w; Re ζ + Q_pw w; Im ζ − Q_qw w]
    let mut lhs = RealMatrix::zeros(td + 2 * n, td);
    lhs.view_mut((0, 0), (td, td)).copy_from(&blk.theta_theta);
    lhs.view_mut((td, 0), (n, td)).copy_from(&(-&blk.p_theta));
    lhs.view_mut((td + n, 0), (n, td)).copy_from(&blk.q_theta);
    let mut rhs = DVector::zeros(td + 2 * n);
    rhs.rows_mut(0, td).copy_from(&(-(&blk.theta_w * &w)));
    for i in 0..n {
        rhs[td + i] = point.zeta[i].re + qw_p[i];
        rhs[td + n + i] = point.zeta[i].im - qw_q[i];
    }
    let (theta, residual) = least_squares(&lhs, &rhs);
    let mut xxi = x.clone().data.as_vec().clone();
    xxi.extend(xi.iter());
    let scale = h.frobenius_norm().max(1.0) * DVector::from_vec(xxi).norm().max(1.0);
    Ok(GraphFit { z: point.z, theta, residual, scale })
}

/// Largest scaled [`graph_from_phi`] residual over `trials` Gaussian `(x, ξ)`.
pub fn verify_graph(gf: &GeneratingFunction, h: &SymplecticMatrix, seed: u64, trials: usize) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let n = gf.n;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = random_vector(n, &mut rng);
        let xi = random_vector(n, &mut rng);
        worst = worst.max(graph_from_phi(gf, &x, &xi, h)?.scaled_residual());
    }
    Ok(worst)
}

pub(crate) fn random_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Outcome of sampling the stationary set of `Φ`.
#[derive(Debug, Clone, Copy)]
pub struct ReverseInclusionReport {
    /// Largest scaled graph-membership residual.
    pub max_residual: f64,
    /// Largest scaled `|Re ω|` between consecutive sampled points.
    pub max_re_omega: f64,
}

/// Samples `(z, θ)` with `∂Φ/∂θ = 0`, sets `ζ = −2∂Φ/∂z`, and checks that
/// `(z, ζ)` lies on the complexified graph of `H`.
pub fn reverse_inclusion_check(gf: &GeneratingFunction, h: &SymplecticMatrix, seed: u64, trials: usize) -> Result<ReverseInclusionReport> {
    let n = gf.n;
    if h.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.n() });
    }
    let td = gf.theta_dim();
    let stationary = SortedSvd::new(&gf.q.rows(2 * n, td).into_owned()).null_space();
    let (a, b, c, d) = (h.a(), h.b(), h.c(), h.d());
    let hscale = h.frobenius_norm().max(1.0);
    let mut rng = seeded_rng(seed);
    let mut report = ReverseInclusionReport { max_residual: 0.0, max_re_omega: 0.0 };
    let mut previous: Option<(ComplexGraphPoint, f64)> = None;
    for _ in 0..trials {
        let coeffs = random_vector(stationary.ncols(), &mut rng);
        let mut v = &stationary * coeffs;
        v /= v.norm().max(f64::MIN_POSITIVE);
        let z = ComplexVector::from_fn(n, |i, _| Complex64::new(v[i], v[n + i]));
        let theta = v.rows(2 * n, td).into_owned();
        let (dz, _) = phi_grad(gf, &z, &theta)?;
        let zeta = dz.map(|c| c * -2.0);
        let x = z.map(|c| c.re);
        let y = z.map(|c| c.im);
        let xi = zeta.map(|c| c.re);
        let eta = zeta.map(|c| c.im);
        let res = (&y - (&a * &x + &b * &xi)).norm() + (&eta - (&c * &x + &d * &xi)).norm();
        let size = (x.norm_squared() + xi.norm_squared()).sqrt().max(1.0);
        report.max_residual = report.max_residual.max(res / (hscale * size));
        let point = ComplexGraphPoint { z, zeta };
        if let Some((prev, prev_size)) = &previous {
            let w = omega_complex(prev, &point);
            report.max_re_omega = report.max_re_omega.max(w.re.abs() / (hscale * hscale * size * prev_size));
        }
        previous = Some((point, size));
    }
    Ok(report)
}

/// `2 Σ ∂²Φ/∂z_j∂θ_ℓ (z_j η_ℓ − w_j θ_ℓ) + 2 Σ ∂²Φ/∂z_j∂z̄_m (z_j w̄_m − w_j z̄_m)`
/// for two stationary points `(z, θ)`, `(w, η)`.
pub fn omega_via_phi(
    gf: &GeneratingFunction,
    z: &ComplexVector,
    theta: &DVector<f64>,
    w: &ComplexVector,
    eta: &DVector<f64>,
) -> Result<Complex64> {
    let theta = gf.theta_view(theta)?;
    let eta = gf.theta_view(eta)?;
    for (pt, th) in [(z, &theta), (w, &eta)] {
        let (_, dth) = phi_grad(gf, pt, th)?;
        let size = pt.norm().max(th.norm()).max(1.0);
        if dth.norm() > 1e-8 * size * gf.q.amax().max(1.0) {
            return Err(Error::Precondition(format!("point is not stationary in theta (|dPhi/dtheta| = {:.3e})", dth.norm())));
        }
    }
    let blk = gf.blocks();
    let zt = blk.z_theta();
    let zz = blk.z_zbar();
    let two = Complex64::new(2.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..gf.n {
        for l in 0..blk.td {
            acc += two * zt[(j, l)] * (z[j] * eta[l] - w[j] * theta[l]);
        }
        for m in 0..gf.n {
            acc += two * zz[(j, m)] * (z[j] * w[m].conj() - w[j] * z[m].conj());
        }
    }
    Ok(acc)
}

/// `2 z·∂Φ/∂z(w, η) − 2 w·∂Φ/∂z(z, θ)`, with `∂Φ/∂z` expanded as
/// `Φ_zθ θ + Φ_zz z + Φ_zz̄ z̄`.
pub fn omega_via_gradients(
    gf: &GeneratingFunction,
    z: &ComplexVector,
    theta: &DVector<f64>,
    w: &ComplexVector,
    eta: &DVector<f64>,
) -> Result<Complex64> {
    let theta = gf.theta_view(theta)?;
    let eta = gf.theta_view(eta)?;
    let blk = gf.blocks();
    let (zt, zz, zzbar) = (blk.z_theta(), blk.z_z(), blk.z_zbar());
    let lift = |v: &DVector<f64>| v.map(|x| Complex64::new(x, 0.0));
    let dz_at = |p: &ComplexVector, th: &DVector<f64>| -> ComplexVector { &zt * lift(th) + &zz * p + &zzbar * p.conjugate() };
    let two = Complex64::new(2.0, 0.0);
    Ok(two * z.dot(&dz_at(w, &eta)) - two * w.dot(&dz_at(z, &theta)))
}

/// Three-way comparison of the restricted complex form.
#[derive(Debug, Clone, Copy)]
pub struct RestrictionReport {
    /// Largest pairwise discrepancy among the three evaluations, divided by
    /// `max(1, ‖H‖_F²) · ‖(x, ξ)‖ · ‖(x', ξ')‖`.
    pub max_discrepancy: f64,
    /// Largest scaled `|Re ω|` seen (should vanish).
    pub max_real_part: f64,
    pub trials: usize,
}

/// Compares `ω` on embedded graph points, `ω` via `Φ` with fitted `θ`, and
/// `i (x, ξ)ᵀ X(H) (x', ξ')`.
pub fn restriction_identity_check(h: &SymplecticMatrix, seed: u64, trials: usize) -> Result<RestrictionReport> {
    let gf = build_genfun(h)?;
    restriction_identity_check_with(&gf, h, seed, trials)
}

pub fn restriction_identity_check_with(gf: &GeneratingFunction, h: &SymplecticMatrix, seed: u64, trials: usize) -> Result<RestrictionReport> {
    let n = h.n();
    let xh = xmap(h).into_matrix();
    let hscale = h.frobenius_norm().powi(2).max(1.0);
    let mut rng = seeded_rng(seed);
    let mut report = RestrictionReport { max_discrepancy: 0.0, max_real_part: 0.0, trials };
    for _ in 0..trials {
        let v1 = random_vector(2 * n, &mut rng);
        let v2 = random_vector(2 * n, &mut rng);
        let (x1, xi1) = (v1.rows(0, n).into_owned(), v1.rows(n, n).into_owned());
        let (x2, xi2) = (v2.rows(0, n).into_owned(), v2.rows(n, n).into_owned());
        let direct = omega_complex(&graph_embed(h, &x1, &xi1), &graph_embed(h, &x2, &xi2));
        let f1 = graph_from_phi(gf, &x1, &xi1, h)?;
        let f2 = graph_from_phi(gf, &x2, &xi2, h)?;
        let via_phi = omega_via_phi(gf, &f1.z, &f1.theta, &f2.z, &f2.theta)?;
        let via_x = Complex64::new(0.0, v1.dot(&(&xh * &v2)));
        let scale = hscale * v1.norm() * v2.norm();
        let disc = (direct - via_phi).norm().max((direct - via_x).norm()).max((via_phi - via_x).norm());
        report.max_discrepancy = report.max_discrepancy.max(disc / scale);
        report.max_real_part = report.max_real_part.max(direct.re.abs().max(via_phi.re.abs()) / scale);
    }
    Ok(report)
}

/// For `ξ ∈ ker B`: `ω((0, ξ + iDξ), (x' + i(Ax' + Bξ'), 0))` against
/// `i[ξᵀ(A + Dᵀ)x' + ξᵀBξ']`. Returns the largest scaled discrepancy.
pub fn fiber_orthogonality_check(h: &SymplecticMatrix, seed: u64, trials: usize) -> f64 {
    let n = h.n();
    let (kb, k) = kernel_basis(&h.b());
    if k == 0 {
        return 0.0;
    }
    let (a, b, d) = (h.a(), h.b(), h.d());
    let mut rng = seeded_rng(seed);
    let hscale = h.frobenius_norm().powi(2).max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let xi = kb.columns(0, k) * random_vector(k, &mut rng);
        let xp = random_vector(n, &mut rng);
        let xip = random_vector(n, &mut rng);
        let dxi = &d * &xi;
        let y = &a * &xp + &b * &xip;
        let zero = ComplexVector::zeros(n);
        let p = ComplexGraphPoint { z: zero.clone(), zeta: ComplexVector::from_fn(n, |i, _| Complex64::new(xi[i], dxi[i])) };
        let q = ComplexGraphPoint { z: ComplexVector::from_fn(n, |i, _| Complex64::new(xp[i], y[i])), zeta: zero };
        let lhs = omega_complex(&p, &q);
        let rhs = Complex64::new(0.0, xi.dot(&((&a + d.transpose()) * &xp)) + xi.dot(&(&b * &xip)));
        let scale = hscale * xi.norm() * (xp.norm() + xip.norm());
        worst = worst.max((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

/// `σ_min(B) / σ_max(B)`, 0 for `B = 0`.
pub fn b_condition_ratio(h: &SymplecticMatrix) -> f64 {
    let svd = SortedSvd::new(&h.b());
    if svd.sigma_max() <= rank_threshold(0.0) {
        0.0
    } else {
        svd.sigma_min() / svd.sigma_max()
    }
}
