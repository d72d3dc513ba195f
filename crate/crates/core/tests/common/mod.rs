//! Reference solutions computed with plain nalgebra, independent of the
//! crate's solvers. Shared by the integration and acceptance suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform(m: usize, n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(lo..hi))
}

/// Minimum-norm least squares `argmin_X ‖M X − Y‖`.
pub fn lstsq(m: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(0, y.ncols());
    }
    m.clone()
        .svd(true, true)
        .solve(y, 1e-13 * m.norm().max(1e-300))
        .expect("both factors requested")
}

/// Least squares through the normal equations, falling back to [`lstsq`].
/// The squared conditioning only perturbs the objective at second order.
fn normal_lstsq(m: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    match (m.transpose() * m).cholesky() {
        Some(ch) => ch.solve(&(m.transpose() * y)),
        None => lstsq(m, y),
    }
}

fn sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Best `‖A − UV‖²` over rank-`r` factorizations, by alternating least
/// squares from `restarts` random starts.
pub fn factorization_oracle(a: &DMatrix<f64>, r: usize, restarts: usize, rng: &mut impl Rng) -> f64 {
    let m = a.nrows();
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut u = gaussian(m, r, rng);
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            let v = normal_lstsq(&u, a);
            u = normal_lstsq(&v.transpose(), &a.transpose()).transpose();
            let obj = sq(&(a - &u * &v));
            let done = last.is_finite() && last - obj <= 1e-15 * last.max(1e-300);
            last = obj;
            if done {
                break;
            }
        }
        best = best.min(last);
    }
    best
}

/// Best `‖A₂ − A₁C − BD‖²` over `C` and a rank-`t` product `BD`, the
/// constrained problem with `A₁` kept exactly.
pub fn constrained_oracle(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    t: usize,
    restarts: usize,
    rng: &mut impl Rng,
) -> f64 {
    let m = a2.nrows();
    let k = a1.ncols();
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut b = gaussian(m, t, rng);
        let mut last = f64::INFINITY;
        for _ in 0..20_000 {
            // (C, D) jointly by least squares on [A₁ B], then B alone
            let cd = lstsq(&concat(a1, &b), a2);
            let (c, d) = (cd.rows(0, k).into_owned(), cd.rows(k, t).into_owned());
            let rest = a2 - a1 * &c;
            b = lstsq(&d.transpose(), &rest.transpose()).transpose();
            let obj = sq(&(rest - &b * &d));
            let done = last.is_finite() && last - obj <= 1e-15 * last.max(1e-300);
            last = obj;
            if done {
                break;
            }
        }
        best = best.min(last);
    }
    best
}

fn concat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// The `X₁` minimizer row by row, each row an ordinary least-squares fit
/// of the stacked system `[diag(w); Cᵀ] xᵀ = [w ⊙ a₁; (A₂ − BD)ᵢᵀ]`.
pub fn stacked_row_x1(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    c: &DMatrix<f64>,
    bd: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (m, k) = a1.shape();
    let n2 = a2.ncols();
    let resid = a2 - bd;
    let mut x1 = DMatrix::zeros(m, k);
    for i in 0..m {
        let mut sys = DMatrix::zeros(k + n2, k);
        let mut rhs = DMatrix::zeros(k + n2, 1);
        for j in 0..k {
            sys[(j, j)] = w1[(i, j)];
            rhs[(j, 0)] = w1[(i, j)] * a1[(i, j)];
        }
        for l in 0..n2 {
            for j in 0..k {
                sys[(k + l, j)] = c[(j, l)];
            }
            rhs[(k + l, 0)] = resid[(i, l)];
        }
        let x = lstsq(&sys, &rhs);
        for j in 0..k {
            x1[(i, j)] = x[(j, 0)];
        }
    }
    x1
}

/// `‖(A₁ − X₁) ⊙ W₁‖² + ‖A₂ − X₁C − BD‖²`, computed directly.
pub fn wlr_objective(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    c: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> f64 {
    sq(&(a1 - x1).component_mul(w1)) + sq(&(a2 - x1 * c - b * d))
}

/// Packs `(X₁, C, B, D)` into one parameter vector (column-major blocks).
pub fn pack(blocks: &[&DMatrix<f64>]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

pub fn unpack(x: &[f64], shapes: &[(usize, usize)]) -> Vec<DMatrix<f64>> {
    let mut pos = 0;
    shapes
        .iter()
        .map(|&(r, c)| {
            let m = DMatrix::from_column_slice(r, c, &x[pos..pos + r * c]);
            pos += r * c;
            m
        })
        .collect()
}

/// Central-difference gradient with a step scaled to each coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
