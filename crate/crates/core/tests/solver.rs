mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wlr_core::ghs::{self, PartitionedInput};
use wlr_core::matrix;
use wlr_core::wlr::{self, BlockWeight, FactorState, Init, SolveOptions, WlrProblem};
use wlr_core::{DenseMatrix, Execution};

fn dm(m: DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_nalgebra(m).unwrap()
}

fn random_problem(rng: &mut ChaCha8Rng) -> WlrProblem {
    let m = rng.random_range(4..=20);
    let n = rng.random_range(4..=20);
    let k = rng.random_range(1..=3);
    let r = rng.random_range(k..=5.min(m).min(n));
    let alpha = [1.0, 10.0, 500.0][rng.random_range(0..3)];
    let a = gaussian(m, n, rng);
    let w = BlockWeight::random(m, k, alpha, 2.0 * alpha, rng).unwrap();
    WlrProblem::new(
        dm(a.columns(0, k).into_owned()),
        dm(a.columns(k, n - k).into_owned()),
        w,
        r,
    )
    .unwrap()
}

fn random_state(p: &WlrProblem, rng: &mut ChaCha8Rng) -> FactorState {
    let (m, k, n2, t) = (p.a1().rows(), p.k(), p.a2().cols(), p.rank() - p.k());
    FactorState {
        x1: dm(gaussian(m, k, rng)),
        c: dm(gaussian(k, n2, rng)),
        b: dm(gaussian(m, t, rng)),
        d: dm(gaussian(t, n2, rng)),
    }
}

#[test]
fn hard_threshold_is_never_beaten_by_factorizations() {
    let mut rng = rng(1);
    for _ in 0..20 {
        let a = gaussian(5, 6, &mut rng);
        for r in 1..=3 {
            let ours = dm(a.clone()).sub(&matrix::hard_threshold(&dm(a.clone()), r).unwrap()).unwrap();
            let oracle = factorization_oracle(&a, r, 20, &mut rng);
            assert!(ours.frob_norm_sq() <= oracle + 1e-8, "r={r}: {} vs {oracle}", ours.frob_norm_sq());
        }
    }
}

#[test]
fn ghs_matches_constrained_oracle() {
    let mut rng = rng(2);
    for _ in 0..10 {
        let a1 = gaussian(4, 2, &mut rng);
        let a2 = gaussian(4, 3, &mut rng);
        let input = PartitionedInput::new(dm(a1.clone()), dm(a2.clone()), 3).unwrap();
        let sol = ghs::ghs_solve(&input).unwrap();
        let ours = dm(a2.clone()).sub(&sol.a2_tilde).unwrap().frob_norm_sq();
        let oracle = constrained_oracle(&a1, &a2, 1, 30, &mut rng);
        assert!((ours - oracle).abs() <= 1e-6, "{ours} vs {oracle}");
    }
}

#[test]
fn ghs_keeps_the_first_block_and_the_rank() {
    let mut rng = rng(3);
    let a1 = gaussian(8, 2, &mut rng);
    let a2 = gaussian(8, 6, &mut rng);
    let input = PartitionedInput::new(dm(a1), dm(a2), 4).unwrap();
    let sol = ghs::ghs_solve(&input).unwrap();
    let full = sol.full(&input);
    assert_eq!(full.columns_range(0, 2), *input.a1());
    let rank = matrix::svd(&full).unwrap().rank(1e-10);
    assert_eq!(rank, 4);
}

#[test]
fn svt_shrinks_every_singular_value_by_tau() {
    let mut rng = rng(4);
    let a = dm(gaussian(9, 6, &mut rng));
    let before = matrix::svd(&a).unwrap().singular_values;
    let tau = before[2];
    let after = matrix::svd(&ghs::svt_shrink(&a, tau).unwrap()).unwrap().singular_values;
    for (s0, s1) in before.iter().zip(&after) {
        assert!((s1 - (s0 - tau).max(0.0)).abs() < 1e-10, "{s0} -> {s1}");
    }
}

#[test]
fn x1_update_matches_stacked_least_squares() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let p = random_problem(&mut rng);
        let s = random_state(&p, &mut rng);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let ours = wlr::update_x1(p.a1(), p.a2(), p.weight(), &s, exec).unwrap().value;
            let bd = s.b.as_nalgebra() * s.d.as_nalgebra();
            let oracle = stacked_row_x1(
                p.a1().as_nalgebra(),
                p.a2().as_nalgebra(),
                p.weight().w1().as_nalgebra(),
                s.c.as_nalgebra(),
                &bd,
            );
            let err = (ours.as_nalgebra() - &oracle).norm() / oracle.norm().max(1.0);
            assert!(err < 1e-10, "{err}");
        }
    }
}

/// Each block update zeroes the gradient of its own block.
#[test]
fn block_updates_are_exact_minimizers() {
    let mut rng = rng(6);
    for _ in 0..10 {
        let p = random_problem(&mut rng);
        let mut s = random_state(&p, &mut rng);
        let w1 = p.weight().w1().as_nalgebra().clone();
        let (a1, a2) = (p.a1().as_nalgebra().clone(), p.a2().as_nalgebra().clone());
        for block in 0..4 {
            let upd = match block {
                0 => wlr::update_x1(p.a1(), p.a2(), p.weight(), &s, Execution::Sequential),
                1 => wlr::update_c(p.a2(), &s),
                2 => wlr::update_b(p.a2(), &s),
                _ => wlr::update_d(p.a2(), &s),
            }
            .unwrap()
            .value;
            match block {
                0 => s.x1 = upd,
                1 => s.c = upd,
                2 => s.b = upd,
                _ => s.d = upd,
            }
            let parts: Vec<DMatrix<f64>> = [&s.x1, &s.c, &s.b, &s.d].iter().map(|m| m.as_nalgebra().clone()).collect();
            let x = parts[block].iter().copied().collect::<Vec<_>>();
            let shape = parts[block].shape();
            let f = |v: &[f64]| {
                let mut q = parts.clone();
                q[block] = DMatrix::from_column_slice(shape.0, shape.1, v);
                wlr_objective(&a1, &a2, &w1, &q[0], &q[1], &q[2], &q[3])
            };
            let g = fd_gradient(f, &x);
            let obj = p.objective(&s).unwrap();
            assert!(norm(&g) <= 1e-5 * (1.0 + obj), "block {block}: |g| = {}", norm(&g));
        }
    }
}

#[test]
fn decrease_identity_and_bounds_hold_per_sweep() {
    let mut rng = rng(7);
    for seed in 0..20 {
        let p = random_problem(&mut rng);
        let opts = SolveOptions {
            init: Init::Random { seed },
            eps: 1e-12,
            max_iter: 200,
            ..SolveOptions::default()
        };
        let (_, rep) = wlr::solve(&p, &opts).unwrap();
        assert!(rep.max_identity_residual() <= 1e-6, "{}", rep.max_identity_residual());
        assert!(rep.is_monotone(1e-9));
        assert!(rep.decrease_bound_violation() <= 1e-9);
        for r in &rep.records {
            assert!(r.decrease + 1e-9 >= 0.5 * r.low_rank_change_sq);
        }
    }
}

#[test]
fn history_reproduces_the_objective_trace() {
    let mut rng = rng(8);
    let p = random_problem(&mut rng);
    let opts = SolveOptions {
        init: Init::Random { seed: 1 },
        max_iter: 15,
        eps: 1e-14,
        keep_history: true,
        ..SolveOptions::default()
    };
    let (_, rep) = wlr::solve(&p, &opts).unwrap();
    assert_eq!(rep.history.len(), rep.objective_trace.len());
    let w1 = p.weight().w1().as_nalgebra();
    for (s, &obj) in rep.history.iter().zip(&rep.objective_trace) {
        let direct = wlr_objective(
            p.a1().as_nalgebra(),
            p.a2().as_nalgebra(),
            w1,
            s.x1.as_nalgebra(),
            s.c.as_nalgebra(),
            s.b.as_nalgebra(),
            s.d.as_nalgebra(),
        );
        assert!((direct - obj).abs() <= 1e-10 * direct.max(1.0));
    }
}

#[test]
fn unit_weights_collapse_to_hard_thresholding() {
    let mut rng = rng(9);
    for _ in 0..5 {
        let (m, n, k, r) = (10, 8, 2, 4);
        let a = dm(gaussian(m, n, &mut rng));
        let target = a.sub(&matrix::hard_threshold(&a, r).unwrap()).unwrap().frob_norm_sq();
        let p = WlrProblem::new(a.columns_range(0, k), a.columns_range(k, n - k), BlockWeight::uniform(m, k, 1.0).unwrap(), r).unwrap();
        let opts = SolveOptions {
            eps: 1e-14,
            max_iter: 20_000,
            ..SolveOptions::default()
        };
        let (_, rep) = wlr::solve(&p, &opts).unwrap();
        let got = rep.final_objective();
        assert!((got - target).abs() <= 1e-6 * target, "{got} vs {target}");
    }
}

#[test]
fn realizable_rank_is_fit_exactly() {
    let mut rng = rng(10);
    let (m, n, k, r) = (12, 9, 2, 4);
    let a = dm(gaussian(m, r, &mut rng) * gaussian(r, n, &mut rng));
    let w = BlockWeight::random(m, k, 500.0, 1000.0, &mut rng).unwrap();
    let p = WlrProblem::new(a.columns_range(0, k), a.columns_range(k, n - k), w, r).unwrap();
    let (_, rep) = wlr::solve(&p, &SolveOptions::default()).unwrap();
    assert!(rep.final_objective() <= 1e-8 * a.frob_norm_sq());
}

fn distance_to_ghs(a: &DMatrix<f64>, k: usize, r: usize, lambda: f64) -> f64 {
    let (m, n) = a.shape();
    let (a1, a2) = (dm(a.columns(0, k).into_owned()), dm(a.columns(k, n - k).into_owned()));
    let input = PartitionedInput::new(a1.clone(), a2.clone(), r).unwrap();
    let ghs_full = ghs::ghs_solve(&input).unwrap().full(&input);
    let p = WlrProblem::new(a1, a2, BlockWeight::uniform(m, k, lambda).unwrap(), r).unwrap();
    let opts = SolveOptions {
        eps: 1e-16,
        max_iter: 5000,
        ..SolveOptions::default()
    };
    let (state, _) = wlr::solve(&p, &opts).unwrap();
    state.low_rank().sub(&ghs_full).unwrap().frob_norm()
}

/// Uniform weights approach the constrained solution at rate 1/λ²: the
/// gradient coupling term vanishes at first order.
#[test]
fn distance_to_constrained_solution_decays_quadratically() {
    let mut rng = rng(11);
    let mut ratios = Vec::new();
    for _ in 0..5 {
        let a = gaussian(6, 5, &mut rng);
        let d: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&l| distance_to_ghs(&a, 2, 3, l)).collect();
        ratios.push(d[0] / d[1]);
        ratios.push(d[1] / d[2]);
    }
    let med = median(ratios.clone());
    assert!((30.0..=300.0).contains(&med), "median ratio {med}, all {ratios:?}");
}

#[test]
fn converged_solves_are_stationary() {
    let mut rng = rng(12);
    for _ in 0..5 {
        let p = random_problem(&mut rng);
        let opts = SolveOptions {
            eps: 1e-10,
            max_iter: 100_000,
            ..SolveOptions::default()
        };
        let (s, rep) = wlr::solve(&p, &opts).unwrap();
        assert!(rep.converged);
        let g = full_gradient(&p, &s);
        let obj = rep.final_objective();
        assert!(norm(&g) <= 1e-4 * (1.0 + obj), "|g| = {} obj = {obj}", norm(&g));
    }
}

fn full_gradient(p: &WlrProblem, s: &FactorState) -> Vec<f64> {
    let blocks = [&s.x1, &s.c, &s.b, &s.d].map(|m| m.as_nalgebra().clone());
    let shapes: Vec<_> = blocks.iter().map(|b| b.shape()).collect();
    let x = pack(&blocks.iter().collect::<Vec<_>>());
    let (a1, a2, w1) = (p.a1().as_nalgebra(), p.a2().as_nalgebra(), p.weight().w1().as_nalgebra());
    fd_gradient(
        |v| {
            let q = unpack(v, &shapes);
            wlr_objective(a1, a2, w1, &q[0], &q[1], &q[2], &q[3])
        },
        &x,
    )
}

#[test]
fn parallel_and_sequential_solves_agree_bitwise() {
    let mut rng = rng(13);
    let a = dm(gaussian(300, 12, &mut rng));
    let w = BlockWeight::random(300, 3, 500.0, 1000.0, &mut rng).unwrap();
    let p = WlrProblem::new(a.columns_range(0, 3), a.columns_range(3, 9), w, 5).unwrap();
    let run = |execution| {
        let opts = SolveOptions {
            execution,
            init: Init::Random { seed: 4 },
            max_iter: 30,
            ..SolveOptions::default()
        };
        wlr::solve(&p, &opts).unwrap()
    };
    let (s1, r1) = run(Execution::Sequential);
    let (s2, r2) = run(Execution::Parallel);
    assert_eq!(s1, s2);
    assert_eq!(r1.objective_trace, r2.objective_trace);
}

#[test]
fn rank_equal_to_k_has_no_free_factors() {
    let mut rng = rng(14);
    let a = dm(gaussian(7, 5, &mut rng));
    let w = BlockWeight::uniform(7, 2, 100.0).unwrap();
    let p = WlrProblem::new(a.columns_range(0, 2), a.columns_range(2, 3), w, 2).unwrap();
    let (s, rep) = wlr::solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(s.b.shape(), (7, 0));
    assert_eq!(s.d.shape(), (0, 3));
    assert!(rep.converged);
}
