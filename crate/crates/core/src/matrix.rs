//! Dense real matrices and the linear algebra the solvers are built on.
//!
//! [`DenseMatrix`] wraps an `nalgebra` matrix and guarantees that every stored
//! entry is finite. Storage is column-major, which makes a vectorized frame a
//! contiguous column. Zero-sized dimensions are allowed so that empty factor
//! blocks (for instance `B` and `D` when `r = k`) need no special casing.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::from_nalgebra(m)
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_column_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_column_slice(rows, cols, data))
    }

    /// Builds a matrix entry by entry. The closure must return finite values.
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        let m = DMatrix::from_fn(rows, cols, f);
        debug_assert!(m.iter().all(|v| v.is_finite()));
        Self(m)
    }

    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let rows = m.nrows().max(1);
            return Err(Error::NonFinite {
                row: pos % rows,
                col: pos / rows,
            });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by arithmetic on already-finite inputs.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    /// Contiguous view of column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.rows();
        &self.0.as_slice()[j * m..(j + 1) * m]
    }

    /// All entries in column-major order.
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::shape("matmul", self.shape(), rhs.shape()));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.check_same("add", rhs)?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<Self> {
        self.check_same("sub", rhs)?;
        Ok(Self(&self.0 - &rhs.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    /// Entrywise product `A ⊙ W`.
    pub fn hadamard(&self, w: &DenseMatrix) -> Result<Self> {
        self.check_same("hadamard", w)?;
        Ok(Self(self.0.component_mul(&w.0)))
    }

    /// Sum of squared entries, accumulated with compensated summation.
    pub fn frob_norm_sq(&self) -> f64 {
        neumaier_sum(self.0.iter().map(|v| v * v))
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    /// Frobenius inner product `⟨A, B⟩ = Σ a_ij b_ij`.
    pub fn frob_inner(&self, rhs: &DenseMatrix) -> Result<f64> {
        self.check_same("frob_inner", rhs)?;
        Ok(neumaier_sum(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a * b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, rhs: &DenseMatrix) -> Result<f64> {
        self.check_same("max_abs_diff", rhs)?;
        Ok(self
            .0
            .iter()
            .zip(rhs.0.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self(self.0.select_columns(idx))
    }

    pub fn columns_range(&self, start: usize, len: usize) -> Self {
        Self(self.0.columns(start, len).into_owned())
    }

    /// Concatenates blocks side by side: `(A₁ A₂ …)`.
    pub fn hstack(blocks: &[&DenseMatrix]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows());
        if let Some(b) = blocks.iter().find(|b| b.rows() != rows) {
            return Err(Error::shape("hstack", (rows, 0), b.shape()));
        }
        let cols = blocks.iter().map(|b| b.cols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.cols()).copy_from(&b.0);
            at += b.cols();
        }
        Ok(Self(out))
    }

    fn check_same(&self, op: &'static str, rhs: &DenseMatrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(op, self.shape(), rhs.shape()));
        }
        Ok(())
    }
}

pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Thin SVD `A = U diag(σ) Vᵀ` with `σ` sorted non-increasing.
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.truncated(self.singular_values.len())
    }

    /// `U_r Σ_r V_rᵀ` using the `r` leading triplets.
    pub fn truncated(&self, r: usize) -> DenseMatrix {
        let u = self.u.0.columns(0, r);
        let v = self.v.0.columns(0, r);
        let mut us = u.into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        DenseMatrix(us * v.transpose())
    }

    /// Numerical rank under the relative cutoff `rel_tol · σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        numerical_rank(&self.singular_values, rel_tol)
    }
}

pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let Some(&top) = singular_values.first() else {
        return 0;
    };
    if top == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn svd(a: &DenseMatrix) -> Result<SvdTriple> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::param(format!("svd of an empty {m}x{n} matrix")));
    }
    // tall inputs (frames as columns): factor R of A = QR, then U = Q·U_R
    let (u, vt, sv) = if m > 2 * n {
        let qr = a.0.clone().qr();
        let (u, vt, sv) = checked_svd(qr.r())?;
        (qr.q() * u, vt, sv)
    } else {
        checked_svd(a.0.clone())?
    };

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let singular_values = order.iter().map(|&i| sv[i].max(0.0)).collect();
    let u = u.select_columns(&order);
    let v = vt.transpose().select_columns(&order);
    Ok(SvdTriple {
        u: DenseMatrix(u),
        singular_values,
        v: DenseMatrix(v),
    })
}

/// Convergence thresholds tried in turn, in units of machine epsilon.
/// nalgebra's bidiagonal SVD occasionally stops on rank-deficient input
/// with factors that do not reconstruct it; a looser threshold fixes it.
const SVD_EPS_LADDER: [f64; 4] = [5.0, 10.0, 100.0, 1000.0];

/// Accepted `‖UΣVᵀ − A‖_F / ‖A‖_F`.
const SVD_RECONSTRUCTION_TOL: f64 = 1e-11;

type Factors = (DMatrix<f64>, DMatrix<f64>, nalgebra::DVector<f64>);

fn checked_svd(x: DMatrix<f64>) -> Result<Factors> {
    let (m, n) = x.shape();
    let max_sweeps = 200 * (m.min(n) + 10);
    let scale = x.norm().max(f64::MIN_POSITIVE);
    for factor in SVD_EPS_LADDER {
        let Some(dec) = x.clone().try_svd(true, true, factor * f64::EPSILON, max_sweeps) else {
            continue;
        };
        let u = dec.u.expect("requested U");
        let vt = dec.v_t.expect("requested Vᵀ");
        let mut us = u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= dec.singular_values[j];
        }
        let err = (us * &vt - &x).norm() / scale;
        let r = vt.nrows();
        let eye = DMatrix::<f64>::identity(r, r);
        let orth = (u.tr_mul(&u) - &eye).norm().max((&vt * vt.transpose() - &eye).norm());
        if err <= SVD_RECONSTRUCTION_TOL && orth <= 1e-10 {
            return Ok((u, vt, dec.singular_values));
        }
        debug!("svd of {m}x{n}: reconstruction {err:.1e}, orthogonality {orth:.1e} at ε·{factor}; retrying");
    }
    Err(Error::SvdNoConvergence { rows: m, cols: n })
}

/// Best rank-`r` approximation: keeps the `r` largest singular values.
pub fn hard_threshold(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let s = a.rows().min(a.cols());
    if r > s {
        return Err(Error::param(format!(
            "rank {r} exceeds min dimension {s} of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if r == 0 {
        return Ok(DenseMatrix::zeros(a.rows(), a.cols()));
    }
    Ok(svd(a)?.truncated(r))
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormal_basis(a1: &DenseMatrix) -> Result<DenseMatrix> {
    let k = a1.cols();
    if k == 0 {
        return Ok(DenseMatrix::zeros(a1.rows(), 0));
    }
    if k > a1.rows() {
        return Err(Error::Degenerate {
            rank: a1.rows(),
            expected: k,
        });
    }
    let dec = svd(a1)?;
    let rank = dec.rank(RANK_TOL);
    if rank < k {
        return Err(Error::Degenerate { rank, expected: k });
    }
    Ok(dec.u.columns_range(0, k))
}

/// `Q Qᵀ A₂`, the projection onto span(Q).
pub fn project(q: &DenseMatrix, a2: &DenseMatrix) -> Result<DenseMatrix> {
    if q.rows() != a2.rows() {
        return Err(Error::shape("project", q.shape(), a2.shape()));
    }
    let coeffs = q.0.tr_mul(&a2.0);
    Ok(DenseMatrix(&q.0 * coeffs))
}

/// `A₂ − Q Qᵀ A₂`, the projection onto the orthogonal complement of span(Q).
pub fn project_orth(q: &DenseMatrix, a2: &DenseMatrix) -> Result<DenseMatrix> {
    let p = project(q, a2)?;
    Ok(DenseMatrix(&a2.0 - p.0))
}

/// Moore–Penrose pseudo-inverse, zeroing singular values `≤ rel_cutoff · σ₁`.
pub fn pinv(a: &DenseMatrix, rel_cutoff: f64) -> Result<DenseMatrix> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(DenseMatrix::zeros(n, m));
    }
    let dec = svd(a)?;
    let top = dec.singular_values[0];
    let mut vs = dec.v.0.clone();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        let s = dec.singular_values[j];
        if s > rel_cutoff * top && s > 0.0 {
            col /= s;
        } else {
            col.fill(0.0);
        }
    }
    Ok(DenseMatrix(vs * dec.u.0.transpose()))
}
