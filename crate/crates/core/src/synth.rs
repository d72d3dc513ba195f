//! Synthetic grayscale video with known background and foreground masks.
//!
//! Scenes are described in TOML:
//!
//! ```toml
//! height = 64
//! width = 80
//! n_frames = 60
//! noise_sigma = 2.0
//! seed = 7
//!
//! [background]
//! kind = "constant"        # constant | gradient | drifting-gain | oscillating-texture
//! level = 110.0
//! texture = 40.0
//!
//! [[events]]
//! size = [12, 12]
//! start = [8.0, 4.0]
//! end = [40.0, 60.0]
//! frames = [10, 59]
//! amplitude = 235.0
//! static_tail = 10
//! ```
//!
//! Boxes occlude the background with a flat `amplitude`; with `static_tail`
//! set, the box travels from `start` to `end` and then stays put for that many
//! final frames of its range.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::frames::{FrameSequence, MAX_PIXEL};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    #[default]
    Constant,
    Gradient,
    DriftingGain,
    OscillatingTexture,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSpec {
    pub kind: BackgroundKind,
    /// Mean intensity.
    pub level: f64,
    /// Amplitude of the static texture pattern.
    pub texture: f64,
    /// Total intensity span of the diagonal ramp (`gradient`).
    pub contrast: f64,
    /// Final multiplicative gain, reached on the last frame (`drifting-gain`).
    pub gain_end: f64,
    /// Amplitude and period in frames of the waving component (`oscillating-texture`).
    pub amplitude: f64,
    pub period: f64,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            kind: BackgroundKind::Constant,
            level: 110.0,
            texture: 0.0,
            contrast: 60.0,
            gain_end: 1.2,
            amplitude: 20.0,
            period: 20.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxEvent {
    /// `[height, width]` in pixels.
    pub size: [usize; 2],
    /// Top-left `[row, col]` on the first frame of the event.
    pub start: [f64; 2],
    /// Top-left position where motion ends; defaults to `start`.
    #[serde(default)]
    pub end: Option<[f64; 2]>,
    /// Inclusive frame range.
    pub frames: [usize; 2],
    pub amplitude: f64,
    #[serde(default)]
    pub static_tail: usize,
}

impl BoxEvent {
    /// Top-left corner on frame `j`, or `None` outside the event.
    pub fn position(&self, j: usize) -> Option<(usize, usize)> {
        let [f0, f1] = self.frames;
        if j < f0 || j > f1 {
            return None;
        }
        let end = self.end.unwrap_or(self.start);
        // the last `static_tail` frames all sit at `end`
        let stop = f1 - self.static_tail.saturating_sub(1).min(f1 - f0);
        let t = if stop > f0 {
            (j.min(stop) - f0) as f64 / (stop - f0) as f64
        } else {
            1.0
        };
        let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as usize;
        Some((lerp(self.start[0], end[0]), lerp(self.start[1], end[1])))
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub events: Vec<BoxEvent>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A generated scene: observed frames, true background and 0/255 masks.
#[derive(Clone, Debug)]
pub struct SynthVideo {
    pub data: FrameSequence,
    pub background: FrameSequence,
    pub masks: FrameSequence,
}

fn texture(y: usize, x: usize) -> f64 {
    use std::f64::consts::TAU;
    let (y, x) = (y as f64, x as f64);
    0.5 * (TAU * x / 17.0 + 0.3).sin() * (TAU * y / 13.0).cos()
        + 0.3 * (TAU * (x + y) / 29.0).sin()
        + 0.2 * (TAU * (x - 2.0 * y) / 11.0).cos()
}

fn wave(y: usize, x: usize) -> f64 {
    use std::f64::consts::TAU;
    (TAU * x as f64 / 9.0).sin() * (TAU * y as f64 / 7.0).sin()
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.n_frames == 0 {
            return Err(Error::Spec("height, width and n_frames must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Spec(format!("noise_sigma = {} must be ≥ 0", self.noise_sigma)));
        }
        let bg = &self.background;
        if bg.kind == BackgroundKind::OscillatingTexture && !(bg.period > 0.0) {
            return Err(Error::Spec("oscillation period must be positive".into()));
        }
        for (i, ev) in self.events.iter().enumerate() {
            let [f0, f1] = ev.frames;
            if f0 > f1 || f1 >= self.n_frames {
                return Err(Error::Spec(format!(
                    "event {i}: frame range {f0}..={f1} outside 0..{}",
                    self.n_frames
                )));
            }
            if ev.size[0] == 0 || ev.size[1] == 0 {
                return Err(Error::Spec(format!("event {i}: empty box")));
            }
            if !(0.0..=MAX_PIXEL).contains(&ev.amplitude) {
                return Err(Error::Spec(format!("event {i}: amplitude outside [0, 255]")));
            }
            for corner in [Some(ev.start), ev.end].into_iter().flatten() {
                let fits = corner[0] >= 0.0
                    && corner[1] >= 0.0
                    && corner[0].round() as usize + ev.size[0] <= self.height
                    && corner[1].round() as usize + ev.size[1] <= self.width;
                if !fits {
                    return Err(Error::Spec(format!(
                        "event {i}: box {:?} at {corner:?} leaves the {}x{} frame",
                        ev.size, self.height, self.width
                    )));
                }
            }
        }
        Ok(())
    }

    /// Noise-free background intensity of pixel `(y, x)` on frame `j`.
    pub fn background_at(&self, y: usize, x: usize, j: usize) -> f64 {
        let bg = &self.background;
        let base = bg.level + bg.texture * texture(y, x);
        let frac = |v: usize, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.0 };
        match bg.kind {
            BackgroundKind::Constant => base,
            BackgroundKind::Gradient => {
                let ramp = 0.5 * (frac(x, self.width) + frac(y, self.height)) - 0.5;
                base + bg.contrast * ramp
            }
            BackgroundKind::DriftingGain => {
                base * (1.0 + (bg.gain_end - 1.0) * frac(j, self.n_frames))
            }
            BackgroundKind::OscillatingTexture => {
                let phase = std::f64::consts::TAU * j as f64 / bg.period;
                base + bg.amplitude * phase.sin() * wave(y, x)
            }
        }
    }

    pub fn generate(&self) -> Result<SynthVideo> {
        self.validate()?;
        let (h, w, n) = (self.height, self.width, self.n_frames);
        let m = h * w;
        let mut truth = vec![0.0; m * n];
        let mut clean = vec![0.0; m * n];
        let mut mask = vec![0.0; m * n];
        for j in 0..n {
            for x in 0..w {
                for y in 0..h {
                    let v = self.background_at(y, x, j).clamp(0.0, MAX_PIXEL);
                    truth[j * m + x * h + y] = v.round();
                    clean[j * m + x * h + y] = v;
                }
            }
            for ev in &self.events {
                if let Some((r0, c0)) = ev.position(j) {
                    for x in c0..c0 + ev.size[1] {
                        for y in r0..r0 + ev.size[0] {
                            clean[j * m + x * h + y] = ev.amplitude;
                            mask[j * m + x * h + y] = MAX_PIXEL;
                        }
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let observed: Vec<f64> = clean
            .iter()
            .map(|&v| {
                let noisy = if self.noise_sigma > 0.0 {
                    v + self.noise_sigma * normal.sample(&mut rng)
                } else {
                    v
                };
                noisy.clamp(0.0, MAX_PIXEL).round()
            })
            .collect();
        let seq = |v: &[f64]| FrameSequence::new(h, w, DenseMatrix::from_column_slice(m, n, v)?);
        Ok(SynthVideo {
            data: seq(&observed)?,
            background: seq(&truth)?,
            masks: seq(&mask)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"
        height = 20
        width = 24
        n_frames = 30
        noise_sigma = 0.0
        [background]
        kind = "gradient"
        texture = 20.0
        [[events]]
        size = [4, 5]
        start = [2.0, 1.0]
        end = [10.0, 15.0]
        frames = [10, 19]
        amplitude = 240.0
        static_tail = 0
        [[events]]
        size = [3, 3]
        start = [1.0, 1.0]
        end = [5.0, 18.0]
        frames = [20, 29]
        amplitude = 20.0
        static_tail = 4
    "#;

    #[test]
    fn pure_background_without_events() {
        let spec = SynthSpec {
            height: 6,
            width: 7,
            n_frames: 4,
            background: BackgroundSpec::default(),
            events: vec![],
            noise_sigma: 0.0,
            seed: 0,
        };
        let v = spec.generate().unwrap();
        assert_eq!(v.data, v.background);
        assert_eq!(v.masks.matrix().max_abs(), 0.0);
    }

    #[test]
    fn masks_follow_event_ranges() {
        let v = SynthSpec::from_toml(SCENE).unwrap().generate().unwrap();
        assert_eq!(v.data.height(), 20);
        for j in 0..30 {
            let area: f64 = v.masks.matrix().column(j).iter().sum::<f64>() / 255.0;
            let expect = match j {
                10..=19 => 20.0,
                20..=29 => 9.0,
                _ => 0.0,
            };
            assert_eq!(area, expect, "frame {j}");
        }
        // frozen over the last four frames, moving before
        let col = |j| v.masks.matrix().column(j).to_vec();
        assert_eq!(col(26), col(29));
        assert_ne!(col(25), col(26));
        assert_eq!(v.data.matrix().get(0, 0), v.background.matrix().get(0, 0));
    }

    #[test]
    fn deterministic_under_seed() {
        let mut spec = SynthSpec::from_toml(SCENE).unwrap();
        spec.noise_sigma = 3.0;
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a.data, b.data);
        spec.seed = 1;
        assert_ne!(spec.generate().unwrap().data, a.data);
    }

    #[test]
    fn background_kinds() {
        let mut spec = SynthSpec::from_toml(SCENE).unwrap();
        spec.background = BackgroundSpec {
            kind: BackgroundKind::DriftingGain,
            texture: 0.0,
            level: 100.0,
            gain_end: 1.2,
            ..BackgroundSpec::default()
        };
        assert_eq!(spec.background_at(3, 3, 0), 100.0);
        assert!((spec.background_at(3, 3, 29) - 120.0).abs() < 1e-12);
        spec.background.kind = BackgroundKind::OscillatingTexture;
        assert_eq!(spec.background_at(3, 3, 0), 100.0);
        assert_ne!(spec.background_at(3, 2, 5), 100.0);
    }

    #[test]
    fn rejects_invalid_geometry() {
        let bad = SCENE.replace("end = [10.0, 15.0]", "end = [18.0, 15.0]");
        assert!(matches!(SynthSpec::from_toml(&bad), Err(Error::Spec(_))));
        let bad = SCENE.replace("frames = [20, 29]", "frames = [20, 30]");
        assert!(SynthSpec::from_toml(&bad).is_err());
        assert!(SynthSpec::from_toml("height = 1\nwidth = 1\nn_frames = 1\nbogus = 2").is_err());
    }
}
