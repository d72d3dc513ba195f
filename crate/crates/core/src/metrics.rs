//! Image quality and detection metrics: PSNR, SSIM/MSSIM, MS-SSIM, ROC/AUC.
//!
//! SSIM statistics are Gaussian-weighted over a square window and evaluated
//! on the valid region only, so an `h × w` image with an 11×11 window yields
//! an `(h−10) × (w−10)` map.

use log::warn;

use crate::error::{Error, Result};
use crate::frames::{FrameSequence, GrayImage, MAX_PIXEL};
use crate::matrix::DenseMatrix;
use crate::parallel::{self, Execution};

/// Per-scale exponents of the five-scale MS-SSIM product.
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Number of thresholds in the ROC sweep over `[0, 255]`.
pub const ROC_THRESHOLDS: usize = 100;

pub fn mse(g: &GrayImage, r: &GrayImage) -> Result<f64> {
    check_same(g, r)?;
    let sum: f64 = g
        .pixels()
        .iter()
        .zip(r.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / g.pixels().len() as f64)
}

/// `10·log₁₀(255² / MSE)` in dB; `+∞` for identical images.
pub fn psnr(g: &GrayImage, r: &GrayImage) -> Result<f64> {
    let e = mse(g, r)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (MAX_PIXEL * MAX_PIXEL / e).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn with_window(window: usize) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }

    fn c1(&self) -> f64 {
        (self.k1 * MAX_PIXEL).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * MAX_PIXEL).powi(2)
    }
}

/// Unit-sum 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Row-major plane used for intermediate filtering.
#[derive(Clone, Debug)]
struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn from_image(img: &GrayImage) -> Self {
        Self {
            h: img.height(),
            w: img.width(),
            v: img.pixels().to_vec(),
        }
    }

    fn zip(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            v: self.v.iter().zip(&other.v).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Separable valid-region filtering.
    fn filter_valid(&self, taps: &[f64]) -> Plane {
        let n = taps.len();
        let ow = self.w + 1 - n;
        let oh = self.h + 1 - n;
        let mut rows = vec![0.0; self.h * ow];
        for y in 0..self.h {
            let line = &self.v[y * self.w..(y + 1) * self.w];
            for x in 0..ow {
                rows[y * ow + x] = taps.iter().zip(&line[x..x + n]).map(|(t, v)| t * v).sum();
            }
        }
        let mut out = vec![0.0; oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t * rows[(y + i) * ow + x])
                    .sum();
            }
        }
        Plane { h: oh, w: ow, v: out }
    }

    /// 2×2 block average with stride 2.
    fn downsample(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut v = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let at = |dy: usize, dx: usize| self.v[(2 * y + dy) * self.w + 2 * x + dx];
                v[y * w + x] = 0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1));
            }
        }
        Plane { h, w, v }
    }
}

/// Luminance and contrast-structure maps of one scale.
struct SsimMaps {
    h: usize,
    w: usize,
    luminance: Vec<f64>,
    contrast_structure: Vec<f64>,
}

fn ssim_maps(a: &Plane, b: &Plane, params: &SsimParams) -> SsimMaps {
    let taps = gaussian_taps(params.window, params.sigma);
    let mu_a = a.filter_valid(&taps);
    let mu_b = b.filter_valid(&taps);
    let aa = a.zip(a, |x, y| x * y).filter_valid(&taps);
    let bb = b.zip(b, |x, y| x * y).filter_valid(&taps);
    let ab = a.zip(b, |x, y| x * y).filter_valid(&taps);
    let (c1, c2) = (params.c1(), params.c2());
    let n = mu_a.v.len();
    let mut luminance = Vec::with_capacity(n);
    let mut contrast_structure = Vec::with_capacity(n);
    for i in 0..n {
        let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
        let va = aa.v[i] - ma * ma;
        let vb = bb.v[i] - mb * mb;
        let cov = ab.v[i] - ma * mb;
        luminance.push((2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1));
        contrast_structure.push((2.0 * cov + c2) / (va + vb + c2));
    }
    SsimMaps {
        h: mu_a.h,
        w: mu_a.w,
        luminance,
        contrast_structure,
    }
}

fn check_same(g: &GrayImage, r: &GrayImage) -> Result<()> {
    if (g.height(), g.width()) != (r.height(), r.width()) {
        return Err(Error::shape(
            "image metric",
            (g.height(), g.width()),
            (r.height(), r.width()),
        ));
    }
    Ok(())
}

/// Local SSIM index over the valid region.
pub fn ssim_map(g: &GrayImage, r: &GrayImage, params: &SsimParams) -> Result<DenseMatrix> {
    check_same(g, r)?;
    if params.window == 0 || g.height() < params.window || g.width() < params.window {
        return Err(Error::param(format!(
            "{}x{} image is smaller than the {w}x{w} window",
            g.height(),
            g.width(),
            w = params.window
        )));
    }
    let maps = ssim_maps(&Plane::from_image(g), &Plane::from_image(r), params);
    let values: Vec<f64> = maps
        .luminance
        .iter()
        .zip(&maps.contrast_structure)
        .map(|(l, cs)| l * cs)
        .collect();
    DenseMatrix::from_row_slice(maps.h, maps.w, &values)
}

/// Mean of the SSIM map.
pub fn mssim(g: &GrayImage, r: &GrayImage, params: &SsimParams) -> Result<f64> {
    let map = ssim_map(g, r, params)?;
    Ok(map.as_slice().iter().sum::<f64>() / map.as_slice().len() as f64)
}

/// Smallest side length accepted by [`msssim`] for a given window.
pub fn msssim_min_size(window: usize) -> usize {
    window << (MSSSIM_WEIGHTS.len() - 1)
}

/// Five-scale MS-SSIM with luminance evaluated at the coarsest scale only.
pub fn msssim(g: &GrayImage, r: &GrayImage, params: &SsimParams) -> Result<f64> {
    check_same(g, r)?;
    let min = msssim_min_size(params.window);
    if g.height() < min || g.width() < min {
        return Err(Error::param(format!(
            "MS-SSIM with a {w}x{w} window needs images of at least {min}x{min}, got {}x{}",
            g.height(),
            g.width(),
            w = params.window
        )));
    }
    let mut a = Plane::from_image(g);
    let mut b = Plane::from_image(r);
    let mut product = 1.0;
    let last = MSSSIM_WEIGHTS.len() - 1;
    for (scale, &weight) in MSSSIM_WEIGHTS.iter().enumerate() {
        let maps = ssim_maps(&a, &b, params);
        let n = maps.contrast_structure.len() as f64;
        let value = if scale == last {
            maps.luminance
                .iter()
                .zip(&maps.contrast_structure)
                .map(|(l, cs)| l * cs)
                .sum::<f64>()
                / n
        } else {
            maps.contrast_structure.iter().sum::<f64>() / n
        };
        // negative means would make the fractional power undefined
        product *= value.max(0.0).powf(weight);
        if scale != last {
            a = a.downsample();
            b = b.downsample();
        }
    }
    Ok(product)
}

/// ROC curve of a pixel-threshold sweep.
#[derive(Clone, Debug)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    /// `(false positive rate, true positive rate)` per threshold.
    pub points: Vec<(f64, f64)>,
    /// Ground truth holds a single class; one of the rates is undefined.
    pub degenerate: bool,
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Sweeps thresholds `linspace(0, 255, n_thresh)`; a pixel is predicted
/// foreground when `|recovered| > t`, and is truly foreground when its mask
/// value is non-zero. Counts accumulate over all pixels of all frames.
pub fn roc(gt_masks: &FrameSequence, recovered: &FrameSequence, n_thresh: usize) -> Result<RocCurve> {
    let (g, r) = (gt_masks.matrix(), recovered.matrix());
    if g.shape() != r.shape() {
        return Err(Error::shape("roc", g.shape(), r.shape()));
    }
    let thresholds = linspace(0.0, MAX_PIXEL, n_thresh);
    let positives = g.as_slice().iter().filter(|&&v| v > 0.0).count();
    let negatives = g.as_slice().len() - positives;
    let degenerate = positives == 0 || negatives == 0;
    if degenerate {
        warn!("ground truth holds a single class; ROC rates are undefined");
    }
    let points = thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&truth, &rec) in g.as_slice().iter().zip(r.as_slice()) {
                if rec.abs() > t {
                    if truth > 0.0 {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let rate = |num: usize, den: usize| {
                if den == 0 {
                    f64::NAN
                } else {
                    num as f64 / den as f64
                }
            };
            (rate(fp, negatives), rate(tp, positives))
        })
        .collect();
    Ok(RocCurve {
        thresholds,
        points,
        degenerate,
    })
}

/// Trapezoidal area under the curve, anchored at `(0,0)` and `(1,1)`;
/// `None` for a degenerate curve.
pub fn auc(curve: &RocCurve) -> Option<f64> {
    if curve.degenerate {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(curve.points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend(curve.points.iter().copied());
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let area = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Some(area)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMetrics {
    pub frame: usize,
    pub psnr: f64,
    pub mssim: f64,
    /// `None` when the frame is too small for five scales.
    pub msssim: Option<f64>,
}

/// Per-frame PSNR / MSSIM / MS-SSIM and their means.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub frames: Vec<FrameMetrics>,
    pub mean_psnr: f64,
    pub mean_mssim: f64,
    pub mean_msssim: Option<f64>,
}

pub fn evaluate_sequence(
    truth: &FrameSequence,
    result: &FrameSequence,
    params: &SsimParams,
    exec: Execution,
) -> Result<MetricsReport> {
    if truth.matrix().shape() != result.matrix().shape()
        || truth.height() != result.height()
    {
        return Err(Error::shape(
            "evaluate_sequence",
            truth.matrix().shape(),
            result.matrix().shape(),
        ));
    }
    let n = truth.n_frames();
    let too_small = truth.height().min(truth.width()) < msssim_min_size(params.window);
    if too_small {
        warn!(
            "{}x{} frames are too small for MS-SSIM with window {}",
            truth.height(),
            truth.width(),
            params.window
        );
    }
    let rows = parallel::map_indexed(n, exec, |j| -> Result<FrameMetrics> {
        let (g, r) = (truth.frame(j), result.frame(j));
        Ok(FrameMetrics {
            frame: j,
            psnr: psnr(&g, &r)?,
            mssim: mssim(&g, &r, params)?,
            msssim: if too_small {
                None
            } else {
                Some(msssim(&g, &r, params)?)
            },
        })
    });
    let frames = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mean = |f: &dyn Fn(&FrameMetrics) -> f64| frames.iter().map(f).sum::<f64>() / n as f64;
    let mean_msssim = frames
        .iter()
        .map(|f| f.msssim)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n as f64);
    Ok(MetricsReport {
        mean_psnr: mean(&|f| f.psnr),
        mean_mssim: mean(&|f| f.mssim),
        mean_msssim,
        frames,
    })
}
