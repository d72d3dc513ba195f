//! Weighted low-rank approximation with block weights `W = (W₁ 𝟙)`.
//!
//! The rank-constrained approximation `(X₁ X₂)` is parameterized as
//! `X₂ = X₁C + BD` and the objective
//!
//! ```text
//! F(X₁, C, B, D) = ‖(A₁ − X₁) ⊙ W₁‖²_F + ‖A₂ − X₁C − BD‖²_F
//! ```
//!
//! is minimized block by block in the order `X₁ → C → B → D`. Every block
//! update is an exact least-squares minimizer, so each sweep decreases `F` by
//! exactly
//!
//! ```text
//! ‖ΔX₁ ⊙ W₁‖² + ‖ΔX₁ C_p‖² + ‖X₁' ΔC‖² + ‖ΔB D_p‖² + ‖B' ΔD‖²
//! ```
//!
//! which [`solve`] evaluates and records at every iteration.

use std::io::{self, Write};

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{self, DenseMatrix};
use crate::parallel::{self, Execution};

/// Gram matrices with `λ_min ≤ GRAM_CUTOFF · λ_max` are inverted by pseudo-inverse.
pub const GRAM_CUTOFF: f64 = 1e-12;
/// Row systems with a larger condition number fall back to a pseudo-inverse.
pub const ROW_COND_LIMIT: f64 = 1e12;
/// Floor of the identity residual denominator, relative to `max(1, m_p)`.
pub const IDENTITY_FLOOR: f64 = 1e-8;

/// First-block weights `W₁` with entries in `[alpha, beta]`, `alpha > 0`.
#[derive(Clone, Debug)]
pub struct BlockWeight {
    w1: DenseMatrix,
    alpha: f64,
    beta: f64,
}

impl BlockWeight {
    pub fn new(w1: DenseMatrix, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= alpha) || !beta.is_finite() {
            return Err(Error::param(format!(
                "weight bounds need 0 < α ≤ β, got α = {alpha}, β = {beta}"
            )));
        }
        if let Some(v) = w1.as_slice().iter().find(|&&v| v < alpha || v > beta) {
            return Err(Error::param(format!(
                "weight entry {v} outside [{alpha}, {beta}]"
            )));
        }
        Ok(Self { w1, alpha, beta })
    }

    pub fn uniform(m: usize, k: usize, value: f64) -> Result<Self> {
        Self::new(DenseMatrix::from_fn(m, k, |_, _| value), value, value)
    }

    /// Entries drawn independently and uniformly from `[alpha, beta]`.
    pub fn random<R: Rng>(m: usize, k: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= alpha) {
            return Err(Error::param(format!(
                "weight bounds need 0 < α ≤ β, got α = {alpha}, β = {beta}"
            )));
        }
        let w1 = DenseMatrix::from_fn(m, k, |_, _| {
            if beta > alpha {
                rng.random_range(alpha..=beta)
            } else {
                alpha
            }
        });
        Self::new(w1, alpha, beta)
    }

    pub fn w1(&self) -> &DenseMatrix {
        &self.w1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Smallest weight entry.
    pub fn lambda(&self) -> f64 {
        self.w1.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Factors `(X₁, C, B, D)` with `X₂ = X₁C + BD`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorState {
    pub x1: DenseMatrix,
    pub c: DenseMatrix,
    pub b: DenseMatrix,
    pub d: DenseMatrix,
}

impl FactorState {
    pub fn x2(&self) -> DenseMatrix {
        DenseMatrix::wrap(self.x1.as_nalgebra() * self.c.as_nalgebra() + self.bd())
    }

    /// The implied approximation `(X₁ X₁C+BD)`.
    pub fn low_rank(&self) -> DenseMatrix {
        DenseMatrix::hstack(&[&self.x1, &self.x2()]).expect("factor rows agree")
    }

    fn bd(&self) -> DMatrix<f64> {
        self.b.as_nalgebra() * self.d.as_nalgebra()
    }

    fn check(&self, m: usize, k: usize, r: usize, n2: usize) -> Result<()> {
        let expect = [
            ("X1", self.x1.shape(), (m, k)),
            ("C", self.c.shape(), (k, n2)),
            ("B", self.b.shape(), (m, r - k)),
            ("D", self.d.shape(), (r - k, n2)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::param(format!(
                    "factor {name} is {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        [&self.x1, &self.c, &self.b, &self.d]
            .iter()
            .all(|m| m.as_slice().iter().all(|v| v.is_finite()))
    }
}

/// A weighted low-rank problem `min F` over factors of total rank `rank`.
#[derive(Clone, Debug)]
pub struct WlrProblem {
    a1: DenseMatrix,
    a2: DenseMatrix,
    weight: BlockWeight,
    rank: usize,
}

impl WlrProblem {
    pub fn new(a1: DenseMatrix, a2: DenseMatrix, weight: BlockWeight, rank: usize) -> Result<Self> {
        if a1.rows() != a2.rows() {
            return Err(Error::shape("wlr blocks", a1.shape(), a2.shape()));
        }
        if weight.w1().shape() != a1.shape() {
            return Err(Error::shape("wlr weight", weight.w1().shape(), a1.shape()));
        }
        let (m, k) = a1.shape();
        let n = k + a2.cols();
        if rank < k || rank > m.min(n) {
            return Err(Error::param(format!(
                "target rank {rank} outside [{k}, {}]",
                m.min(n)
            )));
        }
        Ok(Self {
            a1,
            a2,
            weight,
            rank,
        })
    }

    pub fn a1(&self) -> &DenseMatrix {
        &self.a1
    }

    pub fn a2(&self) -> &DenseMatrix {
        &self.a2
    }

    pub fn weight(&self) -> &BlockWeight {
        &self.weight
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn k(&self) -> usize {
        self.a1.cols()
    }

    pub fn objective(&self, s: &FactorState) -> Result<f64> {
        objective(&self.a1, &self.a2, &self.weight, s)
    }
}

/// Which block a warning refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    X1,
    C,
    B,
    D,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveWarning {
    /// Some row systems of the `X₁` update were solved by pseudo-inverse.
    IllConditionedRows { iteration: usize, rows: usize },
    /// The Gram matrix of a block update was numerically singular.
    SingularGram { iteration: usize, block: Block },
}

/// Result of one block update.
#[derive(Clone, Debug)]
pub struct Update {
    pub value: DenseMatrix,
    /// Number of systems solved by pseudo-inverse fallback.
    pub fallbacks: usize,
}

/// `‖(A₁ − X₁) ⊙ W₁‖²_F + ‖A₂ − X₁C − BD‖²_F`.
pub fn objective(
    a1: &DenseMatrix,
    a2: &DenseMatrix,
    w: &BlockWeight,
    s: &FactorState,
) -> Result<f64> {
    let (m, k) = a1.shape();
    if w.w1().shape() != (m, k) {
        return Err(Error::shape("objective weight", w.w1().shape(), a1.shape()));
    }
    s.check(m, k, k + s.b.cols(), a2.cols())?;
    if a2.rows() != m {
        return Err(Error::shape("objective blocks", a1.shape(), a2.shape()));
    }
    let weighted = (a1.as_nalgebra() - s.x1.as_nalgebra()).component_mul(w.w1().as_nalgebra());
    let rest = a2.as_nalgebra() - s.x1.as_nalgebra() * s.c.as_nalgebra() - s.bd();
    Ok(matrix::neumaier_sum(
        weighted.iter().chain(rest.iter()).map(|v| v * v),
    ))
}

/// Exact minimizer over `X₁` with `C, B, D` fixed, one row system at a time.
///
/// Row `i` solves `x (diag(W₁(i,:)²) + CCᵀ) = E(i,:)` with
/// `E = A₁⊙W₁⊙W₁ + (A₂ − BD)Cᵀ`.
pub fn update_x1(
    a1: &DenseMatrix,
    a2: &DenseMatrix,
    w: &BlockWeight,
    s: &FactorState,
    exec: Execution,
) -> Result<Update> {
    let (m, k) = a1.shape();
    s.check(m, k, k + s.b.cols(), a2.cols())?;
    let w1 = w.w1().as_nalgebra();
    let c = s.c.as_nalgebra();
    let resid = a2.as_nalgebra() - s.bd();
    let w1sq = w1.component_mul(w1);
    let e = a1.as_nalgebra().component_mul(&w1sq) + &resid * c.transpose();
    let gram = c * c.transpose();
    let gram_top = if k > 0 {
        SymmetricEigen::new(gram.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0_f64, f64::max)
    } else {
        0.0
    };

    let rows = parallel::map_indexed(m, exec, |i| {
        let wrow = w1sq.row(i);
        let (lo, hi) = wrow
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mut sys = gram.clone();
        for j in 0..k {
            sys[(j, j)] += wrow[j];
        }
        let rhs: DVector<f64> = e.row(i).transpose();
        // cond(sys) ≤ (max w² + λ_max(CCᵀ)) / min w²
        let cond_bound = (hi + gram_top) / lo;
        if cond_bound > ROW_COND_LIMIT {
            let eig = SymmetricEigen::new(sys.clone());
            let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
            let bottom = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if bottom <= top / ROW_COND_LIMIT {
                return (eigen_pinv_apply(&eig, &rhs, 1.0 / ROW_COND_LIMIT), true);
            }
        }
        match sys.clone().cholesky() {
            Some(ch) => (ch.solve(&rhs), false),
            None => {
                let eig = SymmetricEigen::new(sys);
                (eigen_pinv_apply(&eig, &rhs, 1.0 / ROW_COND_LIMIT), true)
            }
        }
    });

    let mut x1 = DMatrix::zeros(m, k);
    let mut fallbacks = 0;
    for (i, (row, fell_back)) in rows.into_iter().enumerate() {
        fallbacks += fell_back as usize;
        for j in 0..k {
            x1[(i, j)] = row[j];
        }
    }
    Ok(Update {
        value: DenseMatrix::wrap(x1),
        fallbacks,
    })
}

/// `C = (X₁ᵀX₁)⁻¹ X₁ᵀ (A₂ − BD)`.
pub fn update_c(a2: &DenseMatrix, s: &FactorState) -> Result<Update> {
    let x1 = s.x1.as_nalgebra();
    if a2.rows() != x1.nrows() {
        return Err(Error::shape("update_c", s.x1.shape(), a2.shape()));
    }
    let resid = a2.as_nalgebra() - s.bd();
    let (c, fell_back) = solve_gram(x1.tr_mul(x1), x1.tr_mul(&resid));
    Ok(Update {
        value: DenseMatrix::wrap(c),
        fallbacks: fell_back as usize,
    })
}

/// `B = (A₂ − X₁C) Dᵀ (DDᵀ)⁻¹`.
pub fn update_b(a2: &DenseMatrix, s: &FactorState) -> Result<Update> {
    if a2.rows() != s.x1.rows() {
        return Err(Error::shape("update_b", s.x1.shape(), a2.shape()));
    }
    let d = s.d.as_nalgebra();
    let m = a2.rows();
    if d.nrows() == 0 {
        return Ok(Update {
            value: DenseMatrix::zeros(m, 0),
            fallbacks: 0,
        });
    }
    let resid = a2.as_nalgebra() - s.x1.as_nalgebra() * s.c.as_nalgebra();
    let (bt, fell_back) = solve_gram(d * d.transpose(), d * resid.transpose());
    Ok(Update {
        value: DenseMatrix::wrap(bt.transpose()),
        fallbacks: fell_back as usize,
    })
}

/// `D = (BᵀB)⁻¹ Bᵀ (A₂ − X₁C)`.
pub fn update_d(a2: &DenseMatrix, s: &FactorState) -> Result<Update> {
    if a2.rows() != s.x1.rows() {
        return Err(Error::shape("update_d", s.x1.shape(), a2.shape()));
    }
    let b = s.b.as_nalgebra();
    if b.ncols() == 0 {
        return Ok(Update {
            value: DenseMatrix::zeros(0, a2.cols()),
            fallbacks: 0,
        });
    }
    let resid = a2.as_nalgebra() - s.x1.as_nalgebra() * s.c.as_nalgebra();
    let (d, fell_back) = solve_gram(b.tr_mul(b), b.tr_mul(&resid));
    Ok(Update {
        value: DenseMatrix::wrap(d),
        fallbacks: fell_back as usize,
    })
}

/// Solves `G X = R` for a symmetric positive semi-definite Gram matrix `G`,
/// falling back to the pseudo-inverse when `G` is numerically singular.
fn solve_gram(gram: DMatrix<f64>, rhs: DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if gram.nrows() == 0 {
        return (DMatrix::zeros(0, rhs.ncols()), false);
    }
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let bottom = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if top > 0.0 && bottom > GRAM_CUTOFF * top {
        if let Some(ch) = gram.cholesky() {
            return (ch.solve(&rhs), false);
        }
    }
    let mut out = DMatrix::zeros(n, rhs.ncols());
    for (j, col) in rhs.column_iter().enumerate() {
        let x = eigen_pinv_apply(&eig, &col.into_owned(), GRAM_CUTOFF);
        out.set_column(j, &x);
    }
    (out, true)
}

fn eigen_pinv_apply(eig: &SymmetricEigen<f64, nalgebra::Dyn>, rhs: &DVector<f64>, cutoff: f64) -> DVector<f64> {
    let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let q = &eig.eigenvectors;
    let mut coeffs = q.tr_mul(rhs);
    for (c, &l) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        if l > cutoff * top && l > 0.0 {
            *c /= l;
        } else {
            *c = 0.0;
        }
    }
    q * coeffs
}

/// How the factors are initialized.
#[derive(Clone, Debug, Default)]
pub enum Init {
    /// `X₁ = A₁`, `C` the least-squares fit of `A₂` on `A₁`, and `(B, D)`
    /// the rank-`(r−k)` truncated SVD factors of the remaining residual.
    #[default]
    Auto,
    /// Gaussian factors scaled to the data, from a seeded generator.
    Random { seed: u64 },
    Given(FactorState),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub init: Init,
    pub execution: Execution,
    /// Keep every iterate in the report (memory grows with iterations).
    pub keep_history: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps: 1e-7,
            max_iter: 500,
            init: Init::Auto,
            execution: Execution::default(),
            keep_history: false,
        }
    }
}

/// Diagnostics of one sweep `p → p+1`.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `m_{p+1}`.
    pub objective: f64,
    /// `m_p − m_{p+1}`.
    pub decrease: f64,
    /// Sum of the five Frobenius terms of the decrease identity.
    pub identity_sum: f64,
    /// `|decrease − identity_sum|` relative to the larger of the two.
    pub identity_residual: f64,
    /// `‖B'D' − BD‖²_F`.
    pub low_rank_change_sq: f64,
    /// `‖(X₁ − X₁') ⊙ W₁‖²_F`.
    pub weighted_x1_change_sq: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    /// `m_0, m_1, …`, starting with the objective at the initial factors.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<SolveWarning>,
    /// Iterates `(X₁, C, B, D)_p` when `keep_history` was set.
    pub history: Vec<FactorState>,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    pub fn identity_residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.identity_residual).collect()
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objective_trace.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max)
    }

    /// Largest violation of `m_p − m_{p+1} ≥ ½‖B'D' − BD‖²` and of
    /// `m_p − m_{p+1} ≥ ‖ΔX₁ ⊙ W₁‖²` (0 when both hold everywhere).
    pub fn decrease_bound_violation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| {
                let a = 0.5 * r.low_rank_change_sq - r.decrease;
                let b = r.weighted_x1_change_sq - r.decrease;
                a.max(b).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Partial sum `Σ √(m_p − m_{p+1})` over the recorded sweeps.
    pub fn sqrt_decrease_partial_sum(&self) -> f64 {
        self.records.iter().map(|r| r.decrease.max(0.0).sqrt()).sum()
    }

    /// Writes `iteration,objective,decrease,identity_residual` rows.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,objective,decrease,identity_residual")?;
        writeln!(out, "0,{},,", self.objective_trace[0])?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.objective, r.decrease, r.identity_residual
            )?;
        }
        Ok(())
    }
}

pub fn initial_state(problem: &WlrProblem, init: &Init) -> Result<FactorState> {
    let (m, k) = problem.a1.shape();
    let n2 = problem.a2.cols();
    let t = problem.rank - k;
    let state = match init {
        Init::Given(s) => s.clone(),
        Init::Auto => {
            let c = matrix::pinv(&problem.a1, GRAM_CUTOFF)?.matmul(&problem.a2)?;
            let resid = problem.a2.sub(&problem.a1.matmul(&c)?)?;
            let (b, d) = if t == 0 || n2 == 0 {
                (DenseMatrix::zeros(m, t), DenseMatrix::zeros(t, n2))
            } else {
                let dec = matrix::svd(&resid)?;
                let mut b = dec.u.columns_range(0, t).into_nalgebra();
                for (j, mut col) in b.column_iter_mut().enumerate() {
                    col *= dec.singular_values[j];
                }
                (
                    DenseMatrix::wrap(b),
                    dec.v.columns_range(0, t).transpose(),
                )
            };
            FactorState {
                x1: problem.a1.clone(),
                c,
                b,
                d,
            }
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let entries = (m * (k + n2)).max(1) as f64;
            let rms = ((problem.a1.frob_norm_sq() + problem.a2.frob_norm_sq()) / entries).sqrt();
            let scale = if rms > 0.0 { rms } else { 1.0 };
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let mut gen = |rows, cols, s: f64| {
                DenseMatrix::from_fn(rows, cols, |_, _| s * normal.sample(&mut rng))
            };
            let x1 = gen(m, k, scale);
            let c = gen(k, n2, 1.0);
            let b = gen(m, t, scale.sqrt());
            let d = gen(t, n2, scale.sqrt());
            FactorState { x1, c, b, d }
        }
    };
    state.check(m, k, problem.rank, n2)?;
    Ok(state)
}

/// Runs the alternating minimization until the relative decrease
/// `(m_p − m_{p+1}) / max(1, m_p)` falls below `eps` or `max_iter` sweeps pass.
pub fn solve(problem: &WlrProblem, opts: &SolveOptions) -> Result<(FactorState, SolveReport)> {
    if !(opts.eps > 0.0) {
        return Err(Error::param(format!("threshold ε = {} must be > 0", opts.eps)));
    }
    let a1 = &problem.a1;
    let a2 = &problem.a2;
    let w = &problem.weight;
    let mut state = initial_state(problem, &opts.init)?;
    if !state.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut m_p = problem.objective(&state)?;
    let mut report = SolveReport {
        objective_trace: vec![m_p],
        ..SolveReport::default()
    };
    if opts.keep_history {
        report.history.push(state.clone());
    }

    for iteration in 1..=opts.max_iter {
        let prev = state.clone();

        let x1 = update_x1(a1, a2, w, &state, opts.execution)?;
        if x1.fallbacks > 0 {
            warn!("iteration {iteration}: {} ill-conditioned X1 rows", x1.fallbacks);
            report.warnings.push(SolveWarning::IllConditionedRows {
                iteration,
                rows: x1.fallbacks,
            });
        }
        state.x1 = x1.value;
        for block in [Block::C, Block::B, Block::D] {
            let upd = match block {
                Block::C => update_c(a2, &state)?,
                Block::B => update_b(a2, &state)?,
                _ => update_d(a2, &state)?,
            };
            if upd.fallbacks > 0 {
                debug!("iteration {iteration}: singular Gram matrix in {block:?} update");
                report
                    .warnings
                    .push(SolveWarning::SingularGram { iteration, block });
            }
            match block {
                Block::C => state.c = upd.value,
                Block::B => state.b = upd.value,
                _ => state.d = upd.value,
            }
        }
        if !state.is_finite() {
            return Err(Error::Divergence { iteration });
        }

        let m_next = problem.objective(&state)?;
        if !m_next.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let record = sweep_record(iteration, w, &prev, &state, m_p, m_next);
        report.objective_trace.push(m_next);
        report.records.push(record);
        report.iterations = iteration;
        if opts.keep_history {
            report.history.push(state.clone());
        }

        let rel = (m_p - m_next) / m_p.max(1.0);
        m_p = m_next;
        if rel < opts.eps {
            report.converged = true;
            break;
        }
    }
    Ok((state, report))
}

fn sweep_record(
    iteration: usize,
    w: &BlockWeight,
    prev: &FactorState,
    next: &FactorState,
    m_p: f64,
    m_next: f64,
) -> IterationRecord {
    let dx1 = prev.x1.as_nalgebra() - next.x1.as_nalgebra();
    let dc = prev.c.as_nalgebra() - next.c.as_nalgebra();
    let db = prev.b.as_nalgebra() - next.b.as_nalgebra();
    let dd = prev.d.as_nalgebra() - next.d.as_nalgebra();
    let sq = |m: &DMatrix<f64>| matrix::neumaier_sum(m.iter().map(|v| v * v));

    let t1 = sq(&dx1.component_mul(w.w1().as_nalgebra()));
    let t2 = sq(&(&dx1 * prev.c.as_nalgebra()));
    let t3 = sq(&(next.x1.as_nalgebra() * &dc));
    let t4 = sq(&(&db * prev.d.as_nalgebra()));
    let t5 = sq(&(next.b.as_nalgebra() * &dd));
    let identity_sum = matrix::neumaier_sum([t1, t2, t3, t4, t5].into_iter());

    let decrease = m_p - m_next;
    let scale = decrease
        .abs()
        .max(identity_sum)
        .max(IDENTITY_FLOOR * m_p.max(1.0));
    let identity_residual = (decrease - identity_sum).abs() / scale;
    let low_rank_change_sq = sq(&(next.bd() - prev.bd()));

    IterationRecord {
        iteration,
        objective: m_next,
        decrease,
        identity_sum,
        identity_residual,
        low_rank_change_sq,
        weighted_x1_change_sq: t1,
    }
}
