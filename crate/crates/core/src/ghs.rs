//! Closed-form constrained low-rank approximation and singular value shrinkage.
//!
//! Given `A = (A₁ A₂)` with `rank(A₁) = k` and a target rank `r ≥ k`, the
//! matrix `Ã₂ = P(A₂) + H_{r−k}(P⊥(A₂))` minimizes `‖A₂ − X₂‖_F` subject to
//! `rank(A₁ X₂) ≤ r`, where `P` projects onto the column space of `A₁`.

use log::warn;

use crate::error::{Error, Result};
use crate::matrix::{self, DenseMatrix, SvdTriple};

/// Relative gap below which `σ_{r−k}` and `σ_{r−k+1}` are treated as tied.
pub const UNIQUENESS_TOL: f64 = 1e-10;

/// A column-partitioned matrix `(A₁ A₂)` with a target rank.
#[derive(Clone, Debug)]
pub struct PartitionedInput {
    a1: DenseMatrix,
    a2: DenseMatrix,
    rank: usize,
    basis: DenseMatrix,
}

impl PartitionedInput {
    pub fn new(a1: DenseMatrix, a2: DenseMatrix, rank: usize) -> Result<Self> {
        if a1.rows() != a2.rows() {
            return Err(Error::shape("partitioned input", a1.shape(), a2.shape()));
        }
        let (m, k) = a1.shape();
        let n = k + a2.cols();
        if rank < k || rank > m.min(n) {
            return Err(Error::param(format!(
                "target rank {rank} outside [{k}, {}]",
                m.min(n)
            )));
        }
        let basis = matrix::orthonormal_basis(&a1)?;
        Ok(Self {
            a1,
            a2,
            rank,
            basis,
        })
    }

    /// Splits `a` after its first `k` columns.
    pub fn split(a: &DenseMatrix, k: usize, rank: usize) -> Result<Self> {
        if k > a.cols() {
            return Err(Error::param(format!("k = {k} exceeds {} columns", a.cols())));
        }
        Self::new(
            a.columns_range(0, k),
            a.columns_range(k, a.cols() - k),
            rank,
        )
    }

    pub fn a1(&self) -> &DenseMatrix {
        &self.a1
    }

    pub fn a2(&self) -> &DenseMatrix {
        &self.a2
    }

    pub fn k(&self) -> usize {
        self.a1.cols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of span(A₁).
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }
}

#[derive(Clone, Debug)]
pub struct GhsSolution {
    /// The optimal second block `Ã₂`.
    pub a2_tilde: DenseMatrix,
    /// Singular values of `P⊥(A₂)`.
    pub residual_singular_values: Vec<f64>,
    /// False when `σ_{r−k}` and `σ_{r−k+1}` tie and the minimizer is not unique.
    pub unique: bool,
}

impl GhsSolution {
    /// The full approximation `(A₁ Ã₂)`.
    pub fn full(&self, input: &PartitionedInput) -> DenseMatrix {
        DenseMatrix::hstack(&[input.a1(), &self.a2_tilde]).expect("row counts agree")
    }
}

pub fn ghs_solve(input: &PartitionedInput) -> Result<GhsSolution> {
    let (m, _) = input.a2.shape();
    if input.a2.cols() == 0 {
        return Ok(GhsSolution {
            a2_tilde: DenseMatrix::zeros(m, 0),
            residual_singular_values: Vec::new(),
            unique: true,
        });
    }
    let inside = matrix::project(&input.basis, &input.a2)?;
    let outside = input.a2.sub(&inside)?;
    let t = input.rank - input.k();

    let dec: SvdTriple = matrix::svd(&outside)?;
    let sv = &dec.singular_values;
    let unique = is_unique(sv, t);
    if !unique {
        warn!(
            "σ_{t} = {} ties σ_{} = {}; the constrained minimizer is not unique",
            sv[t - 1],
            t + 1,
            sv[t]
        );
    }
    let a2_tilde = inside.add(&dec.truncated(t))?;
    Ok(GhsSolution {
        a2_tilde,
        residual_singular_values: dec.singular_values,
        unique,
    })
}

fn is_unique(sv: &[f64], t: usize) -> bool {
    if t == 0 || t >= sv.len() {
        return true;
    }
    let top = sv[0];
    let (hi, lo) = (sv[t - 1], sv[t]);
    if hi <= matrix::RANK_TOL * top || top == 0.0 {
        // H_t of an (effectively) rank < t matrix is the matrix itself
        return true;
    }
    hi - lo > UNIQUENESS_TOL * top
}

/// One-shot singular value soft-thresholding `U diag(max(σ − τ, 0)) Vᵀ`.
pub fn svt_shrink(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::param(format!("shrinkage τ = {tau} must be ≥ 0")));
    }
    let mut dec = matrix::svd(a)?;
    for s in dec.singular_values.iter_mut() {
        *s = (*s - tau).max(0.0);
    }
    let kept = dec.singular_values.iter().take_while(|&&s| s > 0.0).count();
    Ok(dec.truncated(kept))
}

/// Default shrinkage `τ = 5·√(m·n₁)` for an `m × n₁` first batch.
pub fn default_tau(m: usize, n1: usize) -> f64 {
    5.0 * ((m * n1) as f64).sqrt()
}
