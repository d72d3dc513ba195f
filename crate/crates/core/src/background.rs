//! Background estimation with block-weighted low-rank approximation.
//!
//! Both pipelines first learn which frames are most likely pure background,
//! then hand those frames to the weighted solver as heavily weighted prior
//! columns:
//!
//! - [`batch_background`] processes the whole sequence at once.
//! - [`incremental_background`] walks contiguous batches, seeding each one with
//!   the cleanest columns of the batch before it.

use log::{debug, warn};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ghs;
use crate::matrix::{self, DenseMatrix};
use crate::parallel::Execution;
use crate::wlr::{self, BlockWeight, Init, SolveOptions, SolveReport, WlrProblem};

/// Histogram resolution for the foreground threshold `ε₁`.
pub const OTSU_BINS: usize = 64;
/// Histogram resolution for the mode of the per-frame ratios.
pub const MODE_BINS: usize = 10;

/// Which columns of the previous batch seed the next one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PriorSource {
    /// Raw frames of the previous batch.
    #[default]
    Data,
    /// The previous batch's recovered background at the same indices.
    Background,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BgParams {
    /// Divisor turning the learned index count into the prior width `k`.
    pub i1: usize,
    /// Rank increment of the batch pipeline.
    pub i2: usize,
    /// Rank increment of the incremental pipeline.
    pub ir: usize,
    pub k_max: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub alpha: f64,
    pub beta: f64,
    /// SVT threshold for the first batch; `None` means `5·√(m·n₁)`.
    pub tau: Option<f64>,
    /// Number of batches.
    pub p: usize,
    pub seed: u64,
    /// Rank of the initial PCA split.
    pub init_rank: usize,
    /// Fixed foreground threshold instead of the histogram choice.
    pub eps1: Option<f64>,
    pub prior_source: PriorSource,
    pub execution: Execution,
}

impl Default for BgParams {
    fn default() -> Self {
        Self {
            i1: 2,
            i2: 1,
            ir: 1,
            k_max: 10,
            eps: 1e-7,
            max_iter: 500,
            alpha: 500.0,
            beta: 1000.0,
            tau: None,
            p: 1,
            seed: 0,
            init_rank: 1,
            eps1: None,
            prior_source: PriorSource::Data,
            execution: Execution::default(),
        }
    }
}

impl BgParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.i1 == 0 {
            return bad("i1 must be ≥ 1".into());
        }
        if !(self.alpha > 0.0) || !(self.beta >= self.alpha) || !self.beta.is_finite() {
            return bad(format!(
                "weight interval [{}, {}] needs 0 < α ≤ β",
                self.alpha, self.beta
            ));
        }
        if self.p == 0 || self.k_max == 0 {
            return bad("p and k_max must be ≥ 1".into());
        }
        if !(self.eps > 0.0) {
            return bad(format!("ε = {} must be > 0", self.eps));
        }
        if let Some(t) = self.tau {
            if !(t >= 0.0) {
                return bad(format!("τ = {t} must be ≥ 0"));
            }
        }
        if let Some(e) = self.eps1 {
            if !(e >= 0.0) {
                return bad(format!("ε₁ = {e} must be ≥ 0"));
            }
        }
        Ok(())
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            eps: self.eps,
            max_iter: self.max_iter,
            init: Init::Auto,
            execution: self.execution,
            keep_history: false,
        }
    }
}

/// Sorted, distinct column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        Self(idx)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }
}

/// `A = B + F` with `F = A − B`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub background: DenseMatrix,
    pub foreground: DenseMatrix,
    /// Largest target rank used.
    pub rank: usize,
}

impl Decomposition {
    fn from_background(a: &DenseMatrix, background: DenseMatrix, rank: usize) -> Result<Self> {
        let foreground = a.sub(&background)?;
        Ok(Self {
            background,
            foreground,
            rank,
        })
    }

    /// Foreground with entries `|F| ≤ ε₁` zeroed; `ε₁` defaults to the
    /// histogram threshold of `|F|`. Returns the threshold used.
    pub fn thresholded_foreground(&self, eps1: Option<f64>) -> (DenseMatrix, f64) {
        let f = &self.foreground;
        let t = eps1.unwrap_or_else(|| otsu_threshold(f.as_slice().iter().map(|v| v.abs())));
        let out = DenseMatrix::from_fn(f.rows(), f.cols(), |i, j| {
            let v = f.get(i, j);
            if v.abs() <= t {
                0.0
            } else {
                v
            }
        });
        (out, t)
    }
}

/// Per-batch record of one weighted solve.
#[derive(Clone, Debug)]
pub struct BatchDiagnostics {
    pub batch: usize,
    /// Global frame indices of the prior columns.
    pub indices: Vec<usize>,
    pub k: usize,
    pub r: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
}

impl BatchDiagnostics {
    fn new(batch: usize, indices: Vec<usize>, r: usize, report: &SolveReport) -> Self {
        Self {
            batch,
            k: indices.len(),
            indices,
            r,
            iterations: report.iterations,
            converged: report.converged,
            final_objective: report.final_objective(),
            objective_trace: report.objective_trace.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BgOutcome {
    pub decomposition: Decomposition,
    pub diagnostics: Vec<BatchDiagnostics>,
}

impl BgOutcome {
    pub fn converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }
}

/// Otsu's two-class threshold over a histogram of non-negative values.
/// The threshold is the upper edge of the last bin of the lower class.
pub fn otsu_threshold(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let width = max / OTSU_BINS as f64;
    let mut hist = [0usize; OTSU_BINS];
    let mut total = 0usize;
    for v in values {
        let b = ((v / width) as usize).min(OTSU_BINS - 1);
        hist[b] += 1;
        total += 1;
    }
    let total = total as f64;
    let center = |b: usize| (b as f64 + 0.5) * width;
    let sum_all: f64 = hist.iter().enumerate().map(|(b, &c)| c as f64 * center(b)).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0);
    for (t, &count) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += count as f64;
        sum0 += count as f64 * center(t);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (mu0, mu1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    (best_t + 1) as f64 * width
}

/// Center of the most populated of [`MODE_BINS`] equal-width bins over
/// `[min, max]`; ties go to the lower bin.
pub fn ratio_mode(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return lo;
    }
    let width = (hi - lo) / MODE_BINS as f64;
    let mut hist = [0usize; MODE_BINS];
    for &r in ratios {
        hist[(((r - lo) / width) as usize).min(MODE_BINS - 1)] += 1;
    }
    let mut best = 0;
    for b in 1..MODE_BINS {
        if hist[b] > hist[best] {
            best = b;
        }
    }
    lo + (best as f64 + 0.5) * width
}

/// Per-frame ratio of foreground pixels (`|F| > ε₁`) to background pixels
/// (`B > 0`), with the threshold used.
pub fn frame_ratios(b_in: &DenseMatrix, f_in: &DenseMatrix, eps1: Option<f64>) -> Result<(Vec<f64>, f64)> {
    if b_in.shape() != f_in.shape() {
        return Err(Error::shape("frame ratios", b_in.shape(), f_in.shape()));
    }
    let t = eps1.unwrap_or_else(|| otsu_threshold(f_in.as_slice().iter().map(|v| v.abs())));
    let ratios = (0..f_in.cols())
        .map(|j| {
            let lf = f_in.column(j).iter().filter(|v| v.abs() > t).count();
            let lb = b_in.column(j).iter().filter(|&&v| v > 0.0).count();
            lf as f64 / lb.max(1) as f64
        })
        .collect();
    Ok((ratios, t))
}

/// Frames whose ratio falls below the mode; the single smallest ratio if
/// none does, and every frame when `F_in` vanishes.
pub fn learn_bg_indices(b_in: &DenseMatrix, f_in: &DenseMatrix, eps1: Option<f64>) -> Result<IndexSet> {
    let n = f_in.cols();
    if f_in.max_abs() == 0.0 {
        if b_in.shape() != f_in.shape() {
            return Err(Error::shape("learn_bg_indices", b_in.shape(), f_in.shape()));
        }
        return Ok(IndexSet::new((0..n).collect()));
    }
    let (ratios, t) = frame_ratios(b_in, f_in, eps1)?;
    let mode = ratio_mode(&ratios);
    let mut s: Vec<usize> = (0..n).filter(|&j| ratios[j] < mode).collect();
    if s.is_empty() {
        s.push(argmin(&ratios));
    }
    debug!("ε₁ = {t:.3}, mode ratio {mode:.4}, {} background frames", s.len());
    Ok(IndexSet::new(s))
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = j;
        }
    }
    best
}

/// Up to `k_max` columns of `a_prev` closest to background, cleanest first.
pub fn rank_columns(a_prev: &DenseMatrix, b: &DenseMatrix, k_max: usize, eps1: Option<f64>) -> Result<Vec<usize>> {
    if a_prev.shape() != b.shape() {
        return Err(Error::shape("score_columns", a_prev.shape(), b.shape()));
    }
    let n = a_prev.cols();
    let f = a_prev.sub(b)?;
    if f.max_abs() == 0.0 {
        return Ok((0..n.min(k_max)).collect());
    }
    let (ratios, _) = frame_ratios(b, &f, eps1)?;
    let mode = ratio_mode(&ratios);
    let mut order: Vec<usize> = (0..n).filter(|&j| ratios[j] < mode).collect();
    if order.is_empty() {
        order.push(argmin(&ratios));
    }
    order.sort_by(|&x, &y| ratios[x].total_cmp(&ratios[y]).then(x.cmp(&y)));
    order.truncate(k_max.max(1));
    Ok(order)
}

pub fn score_columns(a_prev: &DenseMatrix, b: &DenseMatrix, k_max: usize, eps1: Option<f64>) -> Result<IndexSet> {
    rank_columns(a_prev, b, k_max, eps1).map(IndexSet::new)
}

/// Keeps candidates (in order) that raise the numerical rank of the block.
fn independent_subset(a: &DenseMatrix, candidates: &[usize]) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &j in candidates {
        let mut trial = kept.clone();
        trial.push(j);
        if matrix::orthonormal_basis(&a.select_columns(&trial)).is_ok() {
            kept = trial;
        }
    }
    if kept.len() < candidates.len() {
        warn!(
            "{} of {} prior columns are linearly dependent and were dropped",
            candidates.len() - kept.len(),
            candidates.len()
        );
    }
    kept
}

/// Whole-sequence estimation: PCA split, index learning, one weighted solve.
pub fn batch_background(a: &DenseMatrix, params: &BgParams) -> Result<BgOutcome> {
    params.validate()?;
    let (m, n) = a.shape();
    if n < 2 {
        return Err(Error::param(format!("need at least 2 frames, got {n}")));
    }
    let b_in = matrix::hard_threshold(a, params.init_rank.min(m.min(n)))?;
    let f_in = a.sub(&b_in)?;
    let s = learn_bg_indices(&b_in, &f_in, params.eps1)?;

    let k = s.len().div_ceil(params.i1);
    if k >= n {
        return Err(Error::param(format!(
            "prior width k = {k} leaves no columns of {n} to fit"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let drawn: Vec<usize> = index::sample(&mut rng, s.len(), k)
        .into_iter()
        .map(|i| s.as_slice()[i])
        .collect();
    let mut prior = independent_subset(a, &drawn);
    prior.sort_unstable();
    let k = prior.len();
    let r = (k + params.i2).min(m.min(n));
    let rest: Vec<usize> = (0..n).filter(|j| !prior.contains(j)).collect();

    let weight = BlockWeight::random(m, k, params.alpha, params.beta, &mut rng)?;
    let problem = WlrProblem::new(a.select_columns(&prior), a.select_columns(&rest), weight, r)?;
    let (state, report) = wlr::solve(&problem, &params.solve_options())?;
    if !report.converged {
        warn!("batch solve stopped after {} iterations without converging", report.iterations);
    }

    let x2 = state.x2();
    let x1 = state.x1;
    let mut cols: Vec<Option<&[f64]>> = vec![None; n];
    for (i, &j) in prior.iter().enumerate() {
        cols[j] = Some(x1.column(i));
    }
    for (i, &j) in rest.iter().enumerate() {
        cols[j] = Some(x2.column(i));
    }
    let data: Vec<f64> = cols.into_iter().flat_map(|c| c.expect("every column placed").iter().copied()).collect();
    let background = DenseMatrix::from_column_slice(m, n, &data)?;

    let diagnostics = vec![BatchDiagnostics::new(0, prior, r, &report)];
    Ok(BgOutcome {
        decomposition: Decomposition::from_background(a, background, r)?,
        diagnostics,
    })
}

/// Contiguous batch boundaries `(start, len)`: `p − 1` batches of `⌊n/p⌋`
/// frames and a last batch taking the remainder.
pub fn batch_ranges(n: usize, p: usize) -> Result<Vec<(usize, usize)>> {
    if p == 0 {
        return Err(Error::param("p must be ≥ 1"));
    }
    let base = n / p;
    if base < 2 {
        return Err(Error::param(format!(
            "{n} frames in {p} batches leaves fewer than 2 frames per batch"
        )));
    }
    Ok((0..p)
        .map(|j| {
            let start = j * base;
            let len = if j + 1 == p { n - start } else { base };
            (start, len)
        })
        .collect())
}

/// Batch-incremental estimation seeded by SVT on the first batch.
pub fn incremental_background(a: &DenseMatrix, params: &BgParams) -> Result<BgOutcome> {
    params.validate()?;
    let (m, n) = a.shape();
    let ranges = batch_ranges(n, params.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let (s0, n1) = ranges[0];
    let first = a.columns_range(s0, n1);
    let tau = params.tau.unwrap_or_else(|| ghs::default_tau(m, n1));
    let mut prev_b = ghs::svt_shrink(&first, tau)?;
    let mut prev_a = first;
    let mut prev_start = s0;

    let mut blocks = Vec::with_capacity(ranges.len());
    let mut diagnostics = Vec::with_capacity(ranges.len());
    let mut max_rank = 0;
    for (j, &(start, len)) in ranges.iter().enumerate() {
        let wrap = |e: Error| Error::Batch {
            batch: j,
            source: Box::new(e),
        };
        let cur = a.columns_range(start, len);
        let mut k_max = params.k_max;
        if k_max > prev_a.cols() {
            warn!("batch {j}: k_max = {k_max} clamped to {} columns", prev_a.cols());
            k_max = prev_a.cols();
        }
        let ranked = rank_columns(&prev_a, &prev_b, k_max, params.eps1).map_err(wrap)?;
        let source = match params.prior_source {
            PriorSource::Data => &prev_a,
            PriorSource::Background => &prev_b,
        };
        let mut s = independent_subset(source, &ranked);
        s.sort_unstable();
        if s.is_empty() {
            return Err(wrap(Error::Degenerate {
                rank: 0,
                expected: ranked.len(),
            }));
        }
        let k = s.len();
        let r = (k + params.ir).min(m.min(k + len));

        let weight = BlockWeight::random(m, k, params.alpha, params.beta, &mut rng).map_err(wrap)?;
        let problem = WlrProblem::new(source.select_columns(&s), cur.clone(), weight, r).map_err(wrap)?;
        let (state, report) = wlr::solve(&problem, &params.solve_options()).map_err(wrap)?;
        if !report.converged {
            warn!("batch {j}: solve stopped after {} iterations without converging", report.iterations);
        }
        let b = state.x2();
        let global: Vec<usize> = s.iter().map(|i| prev_start + i).collect();
        diagnostics.push(BatchDiagnostics::new(j, global, r, &report));
        max_rank = max_rank.max(r);

        blocks.push(b.clone());
        prev_b = b;
        prev_a = cur;
        prev_start = start;
    }
    let refs: Vec<&DenseMatrix> = blocks.iter().collect();
    let background = DenseMatrix::hstack(&refs)?;
    Ok(BgOutcome {
        decomposition: Decomposition::from_background(a, background, max_rank)?,
        diagnostics,
    })
}
