//! Raster types, cropping, quantization and binary file formats.

use std::path::Path;

use crate::rng;
use crate::{Error, Result};

/// H×W×3 unsigned 8-bit raster, row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image8 {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Image8 {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * Self::CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x3 image needs {} samples, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(height * width * 3).collect();
        Self {
            height,
            width,
            data,
        }
    }

    /// Build from a per-sample function `f(y, x, c)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }
}

/// H×W×C real-valued raster, row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageF {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageF {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("image needs at least one channel".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x{channels} image needs {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {bad}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// One channel as a row-major H×W plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageF {
        ImageF {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CropMode {
    Random { seed: u64 },
    Center,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropSpec {
    pub size: usize,
    pub mode: CropMode,
}

impl CropSpec {
    pub fn center(size: usize) -> Self {
        Self {
            size,
            mode: CropMode::Center,
        }
    }

    pub fn random(size: usize, seed: u64) -> Self {
        Self {
            size,
            mode: CropMode::Random { seed },
        }
    }

    /// Top-left corner `(y, x)` of the window inside a `height`×`width` frame.
    pub fn offsets(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.size == 0 {
            return Err(Error::InvalidArgument("crop size must be at least 1".into()));
        }
        if self.size > height || self.size > width {
            return Err(Error::CropTooLarge {
                size: self.size,
                height,
                width,
            });
        }
        Ok(match self.mode {
            CropMode::Center => ((height - self.size) / 2, (width - self.size) / 2),
            CropMode::Random { seed } => {
                let mut r = rng::seeded(seed);
                let y = rng::below(&mut r, height - self.size + 1);
                let x = rng::below(&mut r, width - self.size + 1);
                (y, x)
            }
        })
    }
}

/// Cut a `spec.size`-square window out of `img`. Images smaller than the
/// window are rejected rather than padded.
pub fn crop(img: &Image8, spec: &CropSpec) -> Result<Image8> {
    let (y0, x0) = spec.offsets(img.height, img.width)?;
    let s = spec.size;
    let mut data = Vec::with_capacity(s * s * 3);
    for y in y0..y0 + s {
        let start = (y * img.width + x0) * 3;
        data.extend_from_slice(&img.data[start..start + s * 3]);
    }
    Ok(Image8 {
        height: s,
        width: s,
        data,
    })
}

/// Same window selection as [`crop`], for real-valued rasters.
pub fn crop_f(img: &ImageF, spec: &CropSpec) -> Result<ImageF> {
    let (y0, x0) = spec.offsets(img.height, img.width)?;
    let s = spec.size;
    let c = img.channels;
    let mut data = Vec::with_capacity(s * s * c);
    for y in y0..y0 + s {
        let start = (y * img.width + x0) * c;
        data.extend_from_slice(&img.data[start..start + s * c]);
    }
    Ok(ImageF {
        height: s,
        width: s,
        channels: c,
        data,
    })
}

/// Samples as reals in 0..=255.
pub fn to_float(img: &Image8) -> ImageF {
    ImageF {
        height: img.height,
        width: img.width,
        channels: Image8::CHANNELS,
        data: img.data.iter().map(|&v| f64::from(v)).collect(),
    }
}

/// Affine map `[lo, hi] → [0, 255]`, clamp, round half to even.
/// Only 3-channel images can be quantized back to [`Image8`].
pub fn quantize(img: &ImageF, lo: f64, hi: f64) -> Result<Image8> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "quantize range requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    if img.channels != Image8::CHANNELS {
        return Err(Error::DimensionMismatch(format!(
            "quantize needs 3 channels, got {}",
            img.channels
        )));
    }
    let scale = 255.0 / (hi - lo);
    let data = img
        .data
        .iter()
        .map(|&v| quantize_sample((v - lo) * scale))
        .collect();
    Ok(Image8 {
        height: img.height,
        width: img.width,
        data,
    })
}

#[inline]
pub(crate) fn quantize_sample(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round_ties_even() as u8
}

/// Parse a binary P6 image with maxval 255. Header comments are allowed;
/// trailing bytes after the payload are not.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image8> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    match magic {
        b"P6" => {}
        b"P1" | b"P2" | b"P3" | b"P4" | b"P5" | b"P7" => {
            return Err(Error::UnsupportedFormat(format!(
                "{} (only binary RGB P6 is accepted)",
                String::from_utf8_lossy(magic)
            )))
        }
        other => {
            return Err(Error::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match cur.bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(Error::MalformedHeader("missing whitespace after maxval".into())),
        None => {
            return Err(Error::TruncatedPayload {
                expected: width as usize * height as usize * 3,
                actual: 0,
            })
        }
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    Ok(Image8 {
        height: height as usize,
        width: width as usize,
        data: payload.to_vec(),
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        if !tok.iter().all(u8::is_ascii_digit) {
            return Err(Error::MalformedHeader(format!(
                "{what} is not a number: {:?}",
                String::from_utf8_lossy(tok)
            )));
        }
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

/// Canonical P6: `"P6\n{w} {h}\n255\n"` followed by the raster.
pub fn encode_ppm(img: &Image8) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

/// Canonical P5 grayscale, used for spectrum heatmaps.
pub fn encode_pgm(height: usize, width: usize, samples: &[u8]) -> Result<Vec<u8>> {
    if samples.len() != height * width {
        return Err(Error::DimensionMismatch(format!(
            "{height}x{width} graymap needs {} samples, got {}",
            height * width,
            samples.len()
        )));
    }
    let header = format!("P5\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + samples.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(samples);
    Ok(out)
}

pub fn read_ppm(path: &Path) -> Result<Image8> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(path: &Path, img: &Image8) -> Result<()> {
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

const IMF_MAGIC: &str = "PIXMAP-IMF1";

/// Real-valued raster file: `"PIXMAP-IMF1\n{h} {w} {c}\n"` followed by
/// little-endian f64 samples in row-major, channel-interleaved order.
pub fn encode_imagef(img: &ImageF) -> Vec<u8> {
    let header = format!("{IMF_MAGIC}\n{} {} {}\n", img.height, img.width, img.channels);
    let mut out = Vec::with_capacity(header.len() + img.data.len() * 8);
    out.extend_from_slice(header.as_bytes());
    for v in &img.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_imagef(bytes: &[u8]) -> Result<ImageF> {
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    if magic != IMF_MAGIC.as_bytes() {
        return Err(Error::UnsupportedFormat("not a PIXMAP-IMF1 file".into()));
    }
    let dims = lines
        .next()
        .and_then(|l| std::str::from_utf8(l).ok())
        .ok_or_else(|| Error::MalformedHeader("missing dimension line".into()))?;
    let dims: Vec<usize> = dims
        .split(' ')
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::MalformedHeader(format!("bad dimension line: {e}")))?;
    let [h, w, c] = dims[..] else {
        return Err(Error::MalformedHeader("dimension line needs 3 values".into()));
    };
    let payload = lines.next().unwrap_or_default();
    let expected = h * w * c * 8;
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    ImageF::new(h, w, c, data)
}
