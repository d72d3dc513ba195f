//! Grayscale frames, frame sequences and binary PGM (`P5`) I/O.
//!
//! A frame of `height × width` pixels is vectorized column-major: pixel
//! `(y, x)` lands in row `x·height + y` of the sequence matrix, and frame `j`
//! is column `j`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MAX_PIXEL: f64 = 255.0;

/// Row-major grayscale image with pixels in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::param(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=MAX_PIXEL).contains(*v)) {
            return Err(Error::param(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

/// A stack of equally sized frames stored as an `(height·width) × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    height: usize,
    width: usize,
    data: DenseMatrix,
}

impl FrameSequence {
    pub fn new(height: usize, width: usize, data: DenseMatrix) -> Result<Self> {
        if height == 0 || width == 0 || data.rows() != height * width {
            return Err(Error::param(format!(
                "{} rows cannot hold {height}x{width} frames",
                data.rows()
            )));
        }
        if let Some(v) = data
            .as_slice()
            .iter()
            .find(|v| !(0.0..=MAX_PIXEL).contains(*v))
        {
            return Err(Error::param(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Clamps every entry into `[0, 255]` first.
    pub fn from_matrix_clamped(height: usize, width: usize, data: &DenseMatrix) -> Result<Self> {
        let clamped = DenseMatrix::from_fn(data.rows(), data.cols(), |i, j| {
            data.get(i, j).clamp(0.0, MAX_PIXEL)
        });
        Self::new(height, width, clamped)
    }

    pub fn from_frames(frames: &[GrayImage]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::param("empty frame list"))?;
        let (h, w) = (first.height, first.width);
        let mut cols = Vec::with_capacity(h * w * frames.len());
        for (j, f) in frames.iter().enumerate() {
            if (f.height, f.width) != (h, w) {
                return Err(Error::param(format!(
                    "frame {j} is {}x{}, expected {h}x{w}",
                    f.height, f.width
                )));
            }
            cols.extend(vectorize(f));
        }
        Self::new(h, w, DenseMatrix::from_column_slice(h * w, frames.len(), &cols)?)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_frames(&self) -> usize {
        self.data.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.data
    }

    pub fn frame(&self, j: usize) -> GrayImage {
        devectorize(self.height, self.width, self.data.column(j))
    }

    pub fn frames(&self) -> Vec<GrayImage> {
        (0..self.n_frames()).map(|j| self.frame(j)).collect()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.select_columns(idx),
        }
    }
}

/// Column-major scan of an image.
pub fn vectorize(img: &GrayImage) -> Vec<f64> {
    let mut v = Vec::with_capacity(img.height * img.width);
    for x in 0..img.width {
        for y in 0..img.height {
            v.push(img.get(y, x));
        }
    }
    v
}

fn devectorize(height: usize, width: usize, col: &[f64]) -> GrayImage {
    let mut pixels = vec![0.0; height * width];
    for x in 0..width {
        for y in 0..height {
            pixels[y * width + x] = col[x * height + y];
        }
    }
    GrayImage {
        height,
        width,
        pixels,
    }
}

/// Splits the columns of a matrix into frames; the inverse of vectorization.
pub fn matrix_to_frames(height: usize, width: usize, data: &DenseMatrix) -> Result<Vec<GrayImage>> {
    Ok(FrameSequence::new(height, width, data.clone())?.frames())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|&v| v.round().clamp(0.0, MAX_PIXEL) as u8));
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let fail = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(fail("not a binary PGM (magic P5 expected)"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each header token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(fail("malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail("malformed header number"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fail(&format!("maxval {maxval}, only 255 is supported")));
    }
    if width == 0 || height == 0 {
        return Err(fail("zero image dimension"));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(fail("missing whitespace after maxval"));
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() < width * height {
        return Err(fail(&format!(
            "truncated raster: {} of {} bytes",
            data.len(),
            width * height
        )));
    }
    let pixels = data[..width * height].iter().map(|&b| b as f64).collect();
    GrayImage::new(height, width, pixels)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?, path)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// `.pgm` files of a directory in lexicographic filename order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    Ok(paths)
}

pub fn read_frames(dir: &Path) -> Result<FrameSequence> {
    let paths = list_frames(dir)?;
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = read_pgm(p)?;
        if let Some(first) = frames.first() {
            let first: &GrayImage = first;
            if (img.height, img.width) != (first.height, first.width) {
                return Err(Error::Format {
                    path: p.clone(),
                    msg: format!(
                        "frame is {}x{}, expected {}x{}",
                        img.height, img.width, first.height, first.width
                    ),
                });
            }
        }
        frames.push(img);
    }
    FrameSequence::from_frames(&frames)
}

/// Writes `frame_00000.pgm, frame_00001.pgm, …` into `dir`, creating it.
pub fn write_frames(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for j in 0..seq.n_frames() {
        write_pgm(&dir.join(format!("frame_{j:05}.pgm")), &seq.frame(j))?;
    }
    Ok(())
}
