//! Grayscale images: PGM input and output, and conversion of an image into
//! target intensities on a [`TargetLattice`].

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::TargetLattice;
use crate::refractor::TargetSpec;

/// Row-major grayscale samples in `[0, 1]`, top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ImageFormat(format!(
                "image dimensions {width}x{height} are empty"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: samples.len(),
            });
        }
        if let Some(v) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ImageFormat(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    /// Area-weighted box filter onto a `w x h` grid.
    pub fn resample(&self, w: usize, h: usize) -> IntensityImage {
        let wx = overlap_weights(self.width, w);
        let wy = overlap_weights(self.height, h);
        let mut out = vec![0.0; w * h];
        for (oy, row_w) in wy.iter().enumerate() {
            for (ox, col_w) in wx.iter().enumerate() {
                let mut acc = 0.0;
                for &(sy, ay) in row_w {
                    for &(sx, ax) in col_w {
                        acc += ay * ax * self.get(sx, sy);
                    }
                }
                out[oy * w + ox] = acc.clamp(0.0, 1.0);
            }
        }
        IntensityImage {
            width: w,
            height: h,
            samples: out,
        }
    }

    /// Parses binary (P5) or plain (P2) PGM with 8- or 16-bit samples.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = HeaderCursor { bytes, pos: 0 };
        let magic = cur.token()?;
        let binary = match magic.as_str() {
            "P5" => true,
            "P2" => false,
            other => {
                return Err(Error::ImageFormat(format!(
                    "unsupported magic number {other:?}"
                )))
            }
        };
        let width = cur.number()?;
        let height = cur.number()?;
        let maxval = cur.number()?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::ImageFormat(format!(
                "maxval {maxval} outside 1..=65535"
            )));
        }
        let count = width * height;
        let raw: Vec<usize> = if binary {
            // exactly one whitespace byte separates the header from the raster
            let start = cur.pos + 1;
            let bpp = if maxval > 255 { 2 } else { 1 };
            let data = bytes
                .get(start..start + count * bpp)
                .ok_or_else(|| Error::ImageFormat("truncated raster".into()))?;
            if bpp == 1 {
                data.iter().map(|&v| v as usize).collect()
            } else {
                data.chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                    .collect()
            }
        } else {
            (0..count).map(|_| cur.number()).collect::<Result<_>>()?
        };
        if let Some(v) = raw.iter().find(|&&v| v > maxval) {
            return Err(Error::ImageFormat(format!(
                "sample {v} exceeds maxval {maxval}"
            )));
        }
        let samples = raw.into_iter().map(|v| v as f64 / maxval as f64).collect();
        Self::new(width, height, samples)
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes)
    }

    /// Plain PGM, 16-bit, with one `# ` comment line per entry.
    pub fn to_pgm_string(&self, comments: &[String]) -> String {
        let mut s = String::from("P2\n");
        for c in comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{} {}\n65535", self.width, self.height);
        for row in self.samples.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|v| ((v * 65535.0).round() as u32).to_string())
                .collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn write_pgm(&self, path: &Path, comments: &[String]) -> Result<()> {
        std::fs::write(path, self.to_pgm_string(comments)).map_err(|e| Error::io(path, e))
    }
}

/// For every output cell, the source cells it overlaps and the overlap
/// fractions (summing to one).
fn overlap_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (a, b) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (b.min(s as f64 + 1.0) - a.max(s as f64)) / scale;
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::ImageFormat("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::ImageFormat(format!("expected a number, found {t:?}")))
    }
}

/// Options of the image-to-target conversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetOptions {
    /// Intensities below this fraction of the mean are raised to it.
    pub dark_floor_fraction: f64,
    /// Fraction of directions, brightest first, in the certification mask.
    pub coverage_fraction: f64,
    /// Luminance exponent; 1 is linear.
    pub gamma: f64,
}

impl Default for TargetOptions {
    fn default() -> Self {
        Self {
            dark_floor_fraction: 0.05,
            coverage_fraction: 0.30,
            gamma: 1.0,
        }
    }
}

/// Targets from an image, with the directions on which accuracy is certified.
#[derive(Clone, Debug)]
pub struct ImageTargets {
    pub targets: TargetSpec,
    pub mask: Vec<bool>,
}

impl ImageTargets {
    pub fn masked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i)
    }

    /// Smallest intensity on the mask.
    pub fn min_masked_intensity(&self) -> f64 {
        self.masked_indices()
            .map(|i| self.targets.intensities()[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Resamples `img` to `(n+1) x (n+1)` and reads pixel `(x, y)` as the
/// intensity of lattice point `(i_r, i_r') = (x, n - y)`, so the top image
/// row lands on the largest `r'`.
pub fn image_to_targets(
    img: &IntensityImage,
    lattice: &TargetLattice,
    opts: TargetOptions,
) -> Result<ImageTargets> {
    if !(opts.coverage_fraction > 0.0 && opts.coverage_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "coverage fraction {} outside (0, 1]",
            opts.coverage_fraction
        )));
    }
    if !(opts.dark_floor_fraction > 0.0 && opts.dark_floor_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dark floor fraction {} outside (0, 1)",
            opts.dark_floor_fraction
        )));
    }
    if !(opts.gamma > 0.0 && opts.gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "gamma {} must be positive",
            opts.gamma
        )));
    }
    if img.samples.iter().all(|v| *v == 0.0) {
        return Err(Error::AllDark);
    }
    let n = lattice.n();
    let side = n + 1;
    let small = img.resample(side, side);
    let mut raw = vec![0.0; lattice.len()];
    for y in 0..side {
        for x in 0..side {
            raw[lattice.index(x, n - y)] = small.get(x, y).powf(opts.gamma);
        }
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if mean <= 0.0 {
        return Err(Error::AllDark);
    }
    let floor = opts.dark_floor_fraction * mean;
    for v in raw.iter_mut() {
        *v = v.max(floor);
    }
    let targets = TargetSpec::new(lattice.directions().to_vec(), raw)?;
    let mask = certification_mask(targets.intensities(), opts.coverage_fraction);
    Ok(ImageTargets { targets, mask })
}

/// The `max(1, floor(fraction N))` largest entries, plus any entries tied
/// with the smallest of them.
pub fn certification_mask(f: &[f64], fraction: f64) -> Vec<bool> {
    let count = ((fraction * f.len() as f64).floor() as usize).clamp(1, f.len());
    let mut sorted = f.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // relative slack absorbs roundoff between equal pixels
    let threshold = sorted[count - 1] * (1.0 - 1e-12);
    f.iter().map(|v| *v >= threshold).collect()
}
