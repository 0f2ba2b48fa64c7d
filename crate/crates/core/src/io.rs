//! JSON file formats.
//!
//! - matrices: `{"n": n, "rows": [[...], ...]}` with `2n` rows of `2n` numbers;
//! - generating functions: `{"n", "k", "Q", "basis": {"b", "beta"}}`;
//! - Gaussian states: `{"n", "M_re", "M_im", "c_re", "c_im", "h"}`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::GeneratingFunction;
use crate::metaplectic::GaussianState;
use crate::symplectic::{RealMatrix, SymplecticMatrix};

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Parses a row list into an `r x c` matrix; every row must have `c` entries.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Result<RealMatrix> {
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
    }
    let m = DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied());
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixFile {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &RealMatrix) -> Self {
        MatrixFile { n: m.nrows() / 2, rows: matrix_rows(m) }
    }

    pub fn to_matrix(&self) -> Result<RealMatrix> {
        if self.rows.len() != 2 * self.n {
            return Err(Error::DimensionMismatch { expected: 2 * self.n, found: self.rows.len() });
        }
        matrix_from_rows(&self.rows, 2 * self.n)
    }

    pub fn to_symplectic(&self) -> Result<SymplecticMatrix> {
        SymplecticMatrix::new(self.to_matrix()?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BasisFile {
    pub b: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhiFile {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub basis: BasisFile,
}

impl PhiFile {
    pub fn from_genfun(gf: &GeneratingFunction) -> Self {
        PhiFile {
            n: gf.n(),
            k: gf.k(),
            q: matrix_rows(gf.q()),
            basis: BasisFile { b: matrix_rows(gf.b()), beta: matrix_rows(gf.beta()) },
        }
    }

    pub fn to_genfun(&self) -> Result<GeneratingFunction> {
        let n = self.n;
        let q = matrix_from_rows(&self.q, self.q.len())?;
        let b = matrix_from_rows(&self.basis.b, n)?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.nrows() });
        }
        let beta_cols = self.basis.beta.first().map_or(0, Vec::len);
        let beta = if self.basis.beta.is_empty() {
            RealMatrix::zeros(n, 0)
        } else {
            matrix_from_rows(&self.basis.beta, beta_cols)?
        };
        GeneratingFunction::from_parts(n, self.k, q, b, beta)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GaussianFile {
    pub n: usize,
    #[serde(rename = "M_re")]
    pub m_re: Vec<Vec<f64>>,
    #[serde(rename = "M_im")]
    pub m_im: Vec<Vec<f64>>,
    pub c_re: f64,
    pub c_im: f64,
    pub h: f64,
}

impl GaussianFile {
    pub fn from_state(u: &GaussianState) -> Self {
        GaussianFile {
            n: u.n,
            m_re: matrix_rows(&u.m.map(|z| z.re)),
            m_im: matrix_rows(&u.m.map(|z| z.im)),
            c_re: u.c.re,
            c_im: u.c.im,
            h: u.h,
        }
    }

    pub fn to_state(&self) -> Result<GaussianState> {
        let n = self.n;
        if self.m_re.len() != n || self.m_im.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.m_re.len().min(self.m_im.len()) });
        }
        let re = matrix_from_rows(&self.m_re, n)?;
        let im = matrix_from_rows(&self.m_im, n)?;
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
        GaussianState::new(m, Complex64::new(self.c_re, self.c_im), self.h)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
