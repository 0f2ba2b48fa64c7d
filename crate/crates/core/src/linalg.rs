//! Dense real linear-algebra helpers shared by every module.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. Singular values are
//! always returned in descending order, and all rank decisions go through
//! [`rank_threshold`] so that the same cut-off is used everywhere.

use nalgebra::{DMatrix, DVector};

/// Relative cut-off below which a singular value counts as zero.
pub const RANK_REL_TOL: f64 = 1e-8;
/// Absolute fallback used when the largest singular value is itself tiny.
pub const RANK_ABS_TOL: f64 = 1e-12;

/// Singular value decomposition with full square factors, sorted descending.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors; always `cols x cols`.
    pub v: DMatrix<f64>,
}

impl SortedSvd {
    /// Decomposes `m`. Wide inputs are zero-padded with rows so that `v`
    /// spans the whole domain; `singular_values` then has one entry per
    /// column, the padding contributing zeros.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let work = if r < c {
            let mut sq = DMatrix::<f64>::zeros(c, c);
            sq.view_mut((0, 0), (r, c)).copy_from(m);
            sq
        } else {
            m.clone()
        };
        let svd = work.svd(true, true);
        let u = svd.u.expect("svd requested u");
        let vt = svd.v_t.expect("svd requested v_t");
        let count = svd.singular_values.len();
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

        let mut us = DMatrix::<f64>::zeros(u.nrows(), count);
        let mut vs = DMatrix::<f64>::zeros(c, count);
        let mut s = Vec::with_capacity(count);
        for (dst, &src) in order.iter().enumerate() {
            us.set_column(dst, &u.column(src));
            vs.set_column(dst, &vt.row(src).transpose());
            s.push(svd.singular_values[src]);
        }
        let u = us.rows(0, r).into_owned();
        SortedSvd { u, singular_values: s, v: vs }
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        let thr = rank_threshold(self.sigma_max());
        self.singular_values.iter().filter(|&&s| s > thr).count()
    }

    /// Orthonormal basis of the null space, one vector per column.
    pub fn null_space(&self) -> DMatrix<f64> {
        let rank = self.rank();
        let cols = self.v.nrows();
        let dim = cols - rank;
        self.v.columns(rank, dim).into_owned()
    }
}

pub fn rank_threshold(sigma_max: f64) -> f64 {
    if sigma_max < 1e-4 {
        RANK_ABS_TOL
    } else {
        RANK_REL_TOL * sigma_max
    }
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    SortedSvd::new(m).rank()
}

pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    SortedSvd::new(m).null_space()
}

/// `sin` of the largest principal angle between the column spans of two
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn subspace_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    if u.ncols() != v.ncols() {
        return 1.0;
    }
    if u.ncols() == 0 {
        return 0.0;
    }
    let proj = v - u * (u.transpose() * v);
    SortedSvd::new(&proj).sigma_max().min(1.0)
}

/// Least-squares solution of `m x = rhs` together with the residual norm.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, f64) {
    if m.ncols() == 0 {
        return (DVector::zeros(0), rhs.norm());
    }
    let svd = SortedSvd::new(m);
    let thr = rank_threshold(svd.sigma_max());
    let utb = svd.u.transpose() * rhs;
    let mut x = DVector::<f64>::zeros(m.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > thr {
            x += svd.v.column(i) * (utb[i] / s);
        }
    }
    let res = (m * &x - rhs).norm();
    (x, res)
}

pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of the Taylor series.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 0.5, the
/// series is summed until the next term no longer changes the sum, and the
/// result is squared `s` times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let dim = a.nrows();
    let norm = one_norm(a);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(squarings as i32);

    let mut sum = DMatrix::<f64>::identity(dim, dim);
    let mut term = DMatrix::<f64>::identity(dim, dim);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&sum) * 0.5 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Fréchet derivative of the exponential at `a` in direction `e`,
/// `L(a, e) = ∫₀¹ exp(s a) e exp((1 - s) a) ds`, read off the upper-right
/// block of `exp([[a, e], [0, a]])`. Also returns `exp(a)`.
pub fn expm_frechet(a: &DMatrix<f64>, e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = a.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * d, 2 * d);
    big.view_mut((0, 0), (d, d)).copy_from(a);
    big.view_mut((d, d), (d, d)).copy_from(a);
    big.view_mut((0, d), (d, d)).copy_from(e);
    let ex = expm(&big);
    (
        ex.view((0, 0), (d, d)).into_owned(),
        ex.view((0, d), (d, d)).into_owned(),
    )
}

/// Frobenius inner product.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Flips each column so that its first entry with magnitude above `1e-12`
/// is positive.
pub fn normalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7_f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let expected = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((e - expected).norm() < 1e-14);
    }

    #[test]
    fn expm_large_argument_uses_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn frechet_matches_central_difference() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 0.4, -0.2, 0.3, -0.5, 0.7, 0.0, 0.2, 0.1]);
        let e = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.5, -0.3, 0.2, 0.0, 0.1, 0.9, -0.4]);
        let (_, l) = expm_frechet(&a, &e);
        let h = 1e-6;
        let fd = (expm(&(&a + &e * h)) - expm(&(&a - &e * h))) / (2.0 * h);
        assert!((l - fd).norm() < 1e-8);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-14);
    }

    #[test]
    fn rank_of_zero_matrix_is_zero() {
        assert_eq!(rank(&DMatrix::zeros(4, 4)), 0);
    }

    #[test]
    fn least_squares_consistent_system() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let (sol, res) = least_squares(&m, &(&m * &x));
        assert!((sol - x).norm() < 1e-13);
        assert!(res < 1e-13);
    }

    #[test]
    fn subspace_distance_detects_tilt() {
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let v = DMatrix::from_row_slice(2, 1, &[0.6, 0.8]);
        assert!((subspace_distance(&u, &v) - 0.8).abs() < 1e-14);
        assert!(subspace_distance(&u, &u) < 1e-15);
    }
}
