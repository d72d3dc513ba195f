mod common;

use common::*;

use wlr_core::background::{self, BgParams, PriorSource};
use wlr_core::frames::FrameSequence;
use wlr_core::matrix;
use wlr_core::metrics::{self, SsimParams};
use wlr_core::synth::{SynthSpec, SynthVideo};
use wlr_core::DenseMatrix;

fn static_scene(m: usize, n: usize) -> DenseMatrix {
    let mut rng = rng(21);
    let b = uniform(m, 1, 20.0, 230.0, &mut rng);
    DenseMatrix::from_fn(m, n, |i, _| b[(i, 0)])
}

fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().frob_norm() / b.frob_norm()
}

fn scene(toml: &str) -> SynthVideo {
    SynthSpec::from_toml(toml).unwrap().generate().unwrap()
}

fn min_mssim(truth: &FrameSequence, b: &DenseMatrix, frames: std::ops::Range<usize>) -> f64 {
    let rec = FrameSequence::from_matrix_clamped(truth.height(), truth.width(), b).unwrap();
    let rep = metrics::evaluate_sequence(truth, &rec, &SsimParams::default(), Default::default()).unwrap();
    rep.frames[frames].iter().map(|f| f.mssim).fold(1.0, f64::min)
}

/// Background only for the prior columns; no free rank left to absorb boxes.
fn prior_only() -> BgParams {
    BgParams {
        i2: 0,
        ir: 0,
        ..BgParams::default()
    }
}

#[test]
fn static_scene_is_reproduced_by_both_pipelines() {
    let a = static_scene(150, 12);
    let batch = background::batch_background(&a, &BgParams::default()).unwrap();
    assert!(rel_err(&batch.decomposition.background, &a) <= 1e-6);
    assert!(batch.decomposition.foreground.max_abs() <= 1e-6 * a.max_abs());
    assert_eq!(batch.diagnostics[0].k, 1, "identical prior columns collapse to one");

    for p in [1, 3] {
        let params = BgParams { p, ..BgParams::default() };
        let inc = background::incremental_background(&a, &params).unwrap();
        assert!(rel_err(&inc.decomposition.background, &a) <= 1e-6, "p = {p}");
    }
}

#[test]
fn single_batch_incremental_agrees_with_batch_on_static_input() {
    let a = static_scene(90, 10);
    let params = BgParams::default();
    let batch = background::batch_background(&a, &params).unwrap();
    let inc = background::incremental_background(&a, &params).unwrap();
    let diff = rel_err(&inc.decomposition.background, &batch.decomposition.background);
    assert!(diff <= 1e-6, "{diff}");
}

fn box_sequence() -> SynthVideo {
    // 20x20 frames; a 9x9 box (20% of the area) on frames 10..19
    scene(
        r#"
        height = 20
        width = 20
        n_frames = 20
        seed = 5
        [background]
        kind = "gradient"
        [[events]]
        size = [9, 9]
        start = [2, 2]
        end = [9, 9]
        frames = [10, 19]
        amplitude = 200.0
        "#,
    )
}

#[test]
fn learned_indices_avoid_foreground_frames() {
    let v = box_sequence();
    let masks = v.masks.matrix();
    for j in 10..20 {
        let area = masks.column(j).iter().filter(|&&x| x > 0.0).count();
        assert_eq!(area, 81);
    }
    let a = v.data.matrix();
    let b_in = matrix::hard_threshold(a, 1).unwrap();
    let f_in = a.sub(&b_in).unwrap();
    let s = background::learn_bg_indices(&b_in, &f_in, None).unwrap();
    assert!(!s.is_empty());
    assert!(s.as_slice().iter().all(|&j| j < 10), "{:?}", s.as_slice());
}

#[test]
fn single_frame_spike_is_excluded() {
    let mut a = static_scene(64, 10).into_nalgebra();
    for i in 0..20 {
        a[(i, 6)] += 120.0;
    }
    let a = DenseMatrix::from_nalgebra(a).unwrap();
    let b_in = matrix::hard_threshold(&a, 1).unwrap();
    let f_in = a.sub(&b_in).unwrap();
    let s = background::learn_bg_indices(&b_in, &f_in, None).unwrap();
    assert!(!s.contains(6), "{:?}", s.as_slice());
}

#[test]
fn one_clean_column_is_ranked_first() {
    let b = DenseMatrix::from_fn(30, 4, |i, _| 50.0 + i as f64);
    let a = DenseMatrix::from_fn(30, 4, |i, j| {
        let dirty = j != 2 && i < 5 + 3 * j;
        b.get(i, j) + if dirty { 90.0 } else { 0.0 }
    });
    let ranked = background::rank_columns(&a, &b, 4, None).unwrap();
    assert_eq!(ranked[0], 2);
    assert_eq!(background::rank_columns(&a, &b, 1, None).unwrap(), vec![2]);
    assert_eq!(background::score_columns(&b, &b, 3, None).unwrap().len(), 3);
}

#[test]
fn decomposition_adds_up_and_respects_ranks() {
    let v = box_sequence();
    let a = v.data.matrix();
    for p in [1, 2] {
        let params = BgParams { p, ..BgParams::default() };
        let out = if p == 1 {
            background::batch_background(a, &params)
        } else {
            background::incremental_background(a, &params)
        }
        .unwrap();
        let d = &out.decomposition;
        assert!(d.background.add(&d.foreground).unwrap().max_abs_diff(a).unwrap() < 1e-9);
        let ranges = background::batch_ranges(a.cols(), p).unwrap();
        for (diag, &(start, len)) in out.diagnostics.iter().zip(&ranges) {
            let extra = if p == 1 { params.i2 } else { params.ir };
            assert!(diag.r <= diag.k + extra);
            let block = if p == 1 { d.background.clone() } else { d.background.columns_range(start, len) };
            let rank = matrix::svd(&block).unwrap().rank(1e-9);
            assert!(rank <= diag.r, "batch {}: rank {rank} > r = {}", diag.batch, diag.r);
        }
    }
}

#[test]
fn same_seed_same_decomposition() {
    let v = box_sequence();
    let a = v.data.matrix();
    for p in [1, 2] {
        let params = BgParams { p, seed: 9, ..BgParams::default() };
        let run = || {
            if p == 1 {
                background::batch_background(a, &params)
            } else {
                background::incremental_background(a, &params)
            }
            .unwrap()
        };
        let (x, y) = (run(), run());
        assert_eq!(x.decomposition.background, y.decomposition.background);
        let idx = |o: &background::BgOutcome| o.diagnostics.iter().map(|d| d.indices.clone()).collect::<Vec<_>>();
        assert_eq!(idx(&x), idx(&y));
    }
}

#[test]
fn batch_ranges_split_contiguously() {
    assert_eq!(background::batch_ranges(60, 3).unwrap(), vec![(0, 20), (20, 20), (40, 20)]);
    assert_eq!(background::batch_ranges(13, 4).unwrap(), vec![(0, 3), (3, 3), (6, 3), (9, 4)]);
    assert!(background::batch_ranges(5, 3).is_err());
    assert!(background::batch_ranges(5, 0).is_err());
}

#[test]
fn moving_box_background_is_recovered() {
    let v = scene(
        r#"
        height = 48
        width = 48
        n_frames = 40
        noise_sigma = 2.0
        seed = 3
        [background]
        kind = "constant"
        level = 110.0
        texture = 40.0
        [[events]]
        size = [10, 10]
        start = [4, 2]
        end = [30, 36]
        frames = [10, 29]
        amplitude = 230.0
        "#,
    );
    let out = background::batch_background(v.data.matrix(), &prior_only()).unwrap();
    let worst = min_mssim(&v.background, &out.decomposition.background, 0..40);
    assert!(worst >= 0.95, "{worst}");
}

#[test]
fn prior_source_background_also_recovers() {
    let v = box_sequence();
    let params = BgParams {
        p: 2,
        prior_source: PriorSource::Background,
        ..prior_only()
    };
    let out = background::incremental_background(v.data.matrix(), &params).unwrap();
    let worst = min_mssim(&v.background, &out.decomposition.background, 0..20);
    assert!(worst >= 0.9, "{worst}");
}

/// Slowly brightening scene: batches follow the gain, one global fit lags.
#[test]
fn incremental_tracks_a_drifting_gain() {
    let v = scene(
        r#"
        height = 48
        width = 48
        n_frames = 60
        noise_sigma = 2.0
        seed = 8
        [background]
        kind = "drifting-gain"
        level = 110.0
        texture = 40.0
        gain_end = 1.2
        [[events]]
        size = [8, 8]
        start = [4, 4]
        end = [36, 36]
        frames = [2, 7]
        amplitude = 230.0
        [[events]]
        size = [8, 8]
        start = [36, 4]
        end = [4, 36]
        frames = [42, 47]
        amplitude = 230.0
        "#,
    );
    let a = v.data.matrix();
    let inc = background::incremental_background(a, &BgParams { p: 6, ..prior_only() }).unwrap();
    let batch = background::batch_background(a, &prior_only()).unwrap();
    let inc_all = min_mssim(&v.background, &inc.decomposition.background, 0..60);
    let inc_late = min_mssim(&v.background, &inc.decomposition.background, 50..60);
    let batch_late = min_mssim(&v.background, &batch.decomposition.background, 50..60);
    eprintln!("incremental {inc_all:.4} / late {inc_late:.4}, batch late {batch_late:.4}");
    assert!(inc_all >= 0.90, "{inc_all}");
    assert!(batch_late < inc_late, "batch {batch_late} vs incremental {inc_late}");
}
