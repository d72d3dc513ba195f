use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wlr_core::background::{self, BgOutcome, BgParams, PriorSource};
use wlr_core::frames::{self, FrameSequence};
use wlr_core::ghs::{self, PartitionedInput};
use wlr_core::metrics::{self, MetricsReport, SsimParams, ROC_THRESHOLDS};
use wlr_core::synth::SynthSpec;
use wlr_core::wlr::{self, BlockWeight, SolveOptions, WlrProblem};
use wlr_core::{DenseMatrix, Error, Execution, Result};

use crate::args::{Command, DecomposeArgs, GhsArgs, MetricsArgs, Mode, PriorArg, SolveArgs, SynthArgs};
use crate::table::{self, csv_io, num, opt};
use crate::Status;

pub fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Synth(a) => synth(&a),
        Command::Decompose(a) => decompose(&a),
        Command::Ghs(a) => ghs_baseline(&a),
        Command::Metrics(a) => metrics_report(&a),
        Command::Solve(a) => solve(&a),
    }
}

/// `dir/sub` when it exists, so both a run root and a frame directory work.
fn resolve(dir: &Path, sub: &str) -> PathBuf {
    let nested = dir.join(sub);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn write_sequence(dir: &Path, h: usize, w: usize, data: &DenseMatrix) -> Result<()> {
    frames::write_frames(&FrameSequence::from_matrix_clamped(h, w, data)?, dir)
}

fn synth(a: &SynthArgs) -> Result<Status> {
    let spec = SynthSpec::load(&a.spec)?;
    let video = spec.generate()?;
    frames::write_frames(&video.data, &a.out.join("frames"))?;
    frames::write_frames(&video.background, &a.out.join("background"))?;
    frames::write_frames(&video.masks, &a.out.join("masks"))?;
    info!("wrote {} frames of {}x{}", spec.n_frames, spec.height, spec.width);
    Ok(Status::Done)
}

fn bg_params(a: &DecomposeArgs) -> BgParams {
    BgParams {
        i1: a.i1,
        i2: a.i2,
        ir: a.ir,
        k_max: a.kmax,
        eps: a.eps,
        max_iter: a.max_iter,
        alpha: a.alpha,
        beta: a.beta,
        tau: a.tau,
        p: a.p,
        seed: a.seed,
        init_rank: a.init_rank,
        eps1: a.eps1,
        prior_source: match a.prior_source {
            PriorArg::Data => PriorSource::Data,
            PriorArg::Background => PriorSource::Background,
        },
        execution: Execution::default(),
    }
}

fn decompose(a: &DecomposeArgs) -> Result<Status> {
    let seq = frames::read_frames(&resolve(&a.input, "frames"))?;
    let (h, w) = (seq.height(), seq.width());
    let params = bg_params(a);
    if a.mode == Mode::Batch && a.p != 1 {
        warn!("--p {} is ignored in batch mode", a.p);
    }
    let outcome = match a.mode {
        Mode::Batch => background::batch_background(seq.matrix(), &params)?,
        Mode::Incremental => background::incremental_background(seq.matrix(), &params)?,
    };
    let d = &outcome.decomposition;
    let (fg, eps1) = d.thresholded_foreground(a.eps1);
    info!("foreground threshold ε₁ = {eps1}");
    let magnitude = DenseMatrix::from_fn(fg.rows(), fg.cols(), |i, j| fg.get(i, j).abs());
    write_sequence(&a.out.join("background"), h, w, &d.background)?;
    write_sequence(&a.out.join("foreground"), h, w, &magnitude)?;
    if a.raw_foreground {
        let f = &d.foreground;
        let mapped = DenseMatrix::from_fn(f.rows(), f.cols(), |i, j| (f.get(i, j) + 255.0) / 2.0);
        write_sequence(&a.out.join("foreground_raw"), h, w, &mapped)?;
    }
    write_diagnostics(&a.out.join("diagnostics.csv"), &outcome)?;
    Ok(if outcome.converged() {
        Status::Done
    } else {
        Status::NotConverged
    })
}

fn join(values: impl Iterator<Item = String>) -> String {
    values.collect::<Vec<_>>().join(" ")
}

fn write_diagnostics(path: &Path, outcome: &BgOutcome) -> Result<()> {
    fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record([
        "batch",
        "indices",
        "k",
        "r",
        "iterations",
        "converged",
        "final_objective",
        "objective_trace",
    ])
    .map_err(csv_io)?;
    for d in &outcome.diagnostics {
        w.write_record([
            d.batch.to_string(),
            join(d.indices.iter().map(|i| i.to_string())),
            d.k.to_string(),
            d.r.to_string(),
            d.iterations.to_string(),
            d.converged.to_string(),
            num(d.final_objective),
            join(d.objective_trace.iter().map(|&v| num(v))),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn ghs_baseline(a: &GhsArgs) -> Result<Status> {
    let seq = frames::read_frames(&resolve(&a.input, "frames"))?;
    let input = PartitionedInput::split(seq.matrix(), a.k, a.r)?;
    let sol = ghs::ghs_solve(&input)?;
    if !sol.unique {
        warn!("tied singular values: the baseline is one of several minimizers");
    }
    let full = sol.full(&input);
    write_sequence(&a.out.join("background"), seq.height(), seq.width(), &full)?;
    let f = seq.matrix().sub(&full)?;
    let magnitude = DenseMatrix::from_fn(f.rows(), f.cols(), |i, j| f.get(i, j).abs());
    write_sequence(&a.out.join("foreground"), seq.height(), seq.width(), &magnitude)?;
    Ok(Status::Done)
}

fn check_frames(a: &FrameSequence, b: &FrameSequence, op: &'static str) -> Result<()> {
    let dims = |s: &FrameSequence| (s.height() * s.width(), s.n_frames());
    if (a.height(), a.width(), a.n_frames()) != (b.height(), b.width(), b.n_frames()) {
        return Err(Error::Shape {
            op,
            left: dims(a),
            right: dims(b),
        });
    }
    Ok(())
}

fn write_metric_rows<W: Write>(out: &mut csv::Writer<W>, target: &str, rep: &MetricsReport) -> Result<()> {
    for f in &rep.frames {
        out.write_record([
            target.to_string(),
            f.frame.to_string(),
            num(f.psnr),
            num(f.mssim),
            opt(f.msssim),
        ])
        .map_err(csv_io)?;
    }
    out.write_record([
        target.to_string(),
        "mean".to_string(),
        num(rep.mean_psnr),
        num(rep.mean_mssim),
        opt(rep.mean_msssim),
    ])
    .map_err(csv_io)?;
    Ok(())
}

fn metrics_report(a: &MetricsArgs) -> Result<Status> {
    let truth_bg = frames::read_frames(&resolve(&a.truth, "background"))?;
    let result_bg = frames::read_frames(&resolve(&a.result, "background"))?;
    check_frames(&truth_bg, &result_bg, "truth vs result background")?;
    let params = SsimParams::with_window(a.window);
    let exec = Execution::default();
    let bg_rep = metrics::evaluate_sequence(&truth_bg, &result_bg, &params, exec)?;

    let result_fg_dir = a.result.join("foreground");
    let result_fg = if result_fg_dir.is_dir() {
        Some(frames::read_frames(&result_fg_dir)?)
    } else {
        None
    };
    let masks = match &a.masks {
        Some(dir) => Some(frames::read_frames(&resolve(dir, "masks"))?),
        None => None,
    };

    // the true foreground needs the observed frames next to the truth
    let observed_dir = a.truth.join("frames");
    let mut fg_rep = None;
    if let (Some(masks), Some(fg), true) = (&masks, &result_fg, observed_dir.is_dir()) {
        let observed = frames::read_frames(&observed_dir)?;
        check_frames(&truth_bg, &observed, "truth background vs frames")?;
        check_frames(masks, fg, "masks vs result foreground")?;
        let (o, b, mk) = (observed.matrix(), truth_bg.matrix(), masks.matrix());
        let true_fg = DenseMatrix::from_fn(o.rows(), o.cols(), |i, j| {
            if mk.get(i, j) > 0.0 {
                (o.get(i, j) - b.get(i, j)).abs()
            } else {
                0.0
            }
        });
        let true_fg = FrameSequence::new(truth_bg.height(), truth_bg.width(), true_fg)?;
        fg_rep = Some(metrics::evaluate_sequence(&true_fg, fg, &params, exec)?);
    }

    let file = File::create(&a.out)?;
    let mut out = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(BufWriter::new(file));
    out.write_record(["target", "frame", "psnr", "mssim", "msssim"]).map_err(csv_io)?;
    write_metric_rows(&mut out, "background", &bg_rep)?;
    if let Some(rep) = &fg_rep {
        write_metric_rows(&mut out, "foreground", rep)?;
    }

    if let Some(masks) = &masks {
        match &result_fg {
            Some(fg) => {
                check_frames(masks, fg, "masks vs result foreground")?;
                let curve = metrics::roc(masks, fg, ROC_THRESHOLDS)?;
                out.write_record([""]).map_err(csv_io)?;
                out.write_record(["threshold", "fpr", "tpr"]).map_err(csv_io)?;
                for (t, (fpr, tpr)) in curve.thresholds.iter().zip(&curve.points) {
                    out.write_record([num(*t), num(*fpr), num(*tpr)]).map_err(csv_io)?;
                }
                out.write_record([""]).map_err(csv_io)?;
                out.write_record(["auc".to_string(), opt(metrics::auc(&curve))])
                    .map_err(csv_io)?;
            }
            None => warn!(
                "{} has no foreground/ directory; skipping the ROC analysis",
                a.result.display()
            ),
        }
    }
    out.flush()?;
    Ok(Status::Done)
}

fn solve(a: &SolveArgs) -> Result<Status> {
    let m = table::read_matrix(&a.matrix)?;
    if a.k > m.cols() {
        return Err(Error::Parameter(format!("k = {} exceeds {} columns", a.k, m.cols())));
    }
    let a1 = m.columns_range(0, a.k);
    let a2 = m.columns_range(a.k, m.cols() - a.k);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let weight = BlockWeight::random(m.rows(), a.k, a.alpha, a.beta, &mut rng)?;
    let problem = WlrProblem::new(a1, a2, weight, a.r)?;
    let opts = SolveOptions {
        eps: a.eps,
        max_iter: a.max_iter,
        execution: Execution::default(),
        ..SolveOptions::default()
    };
    let (state, report) = wlr::solve(&problem, &opts)?;
    if let Some(path) = &a.trace {
        let mut w = BufWriter::new(File::create(path)?);
        report.write_trace_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.out {
        table::write_matrix(path, &state.low_rank())?;
    }
    println!(
        "iterations={} converged={} objective={}",
        report.iterations,
        report.converged,
        num(report.final_objective())
    );
    Ok(if report.converged {
        Status::Done
    } else {
        Status::NotConverged
    })
}
