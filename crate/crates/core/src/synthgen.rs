//! Synthetic real/fake corpus.
//!
//! "Real" images are smooth random fields sampled at full resolution. "Fake"
//! images are the same kind of field sampled at half resolution and
//! upsampled ×2, which leaves upsampler-specific traces in the high
//! frequencies. Two content families (A: horizontal gradient, darker; B:
//! vertical gradient, brighter) provide a semantic cue that can be tied to
//! the label during training and swapped at test time.
//!
//! Everything is periodic across the borders (circular blur, wrapping
//! upsampler taps, a one-period cosine gradient), so power spectra are free
//! of edge leakage.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::image::{self, Image8};
use crate::rng::{self, SplitMix64};
use crate::{Error, Result};

/// Mid-grey level the fields are centred on.
const BASE_LEVEL: f64 = 128.0;
/// Per-image scene brightness jitter, uniform in ±this many levels.
const SCENE_JITTER: f64 = 32.0;
/// Standard deviation of the blurred luminance field, in levels.
const FIELD_CONTRAST: f64 = 2.0;
/// Standard deviation of each per-channel colour field, in levels.
const CHROMA_CONTRAST: f64 = 2.0;
/// Peak-to-peak amplitude of the family gradient, in levels.
const RAMP_AMPLITUDE: f64 = 8.0;
/// Fixed per-channel colour balance, in levels.
const COLOR_BALANCE: [f64; 3] = [12.0, 0.0, -12.0];
const BLUR_SIGMA_RANGE: (f64, f64) = (1.0, 3.0);

/// Brightness offset used by [`build_benchmark`] for each family.
pub const FAMILY_BRIGHTNESS: f64 = 64.0;
/// Sensor noise used by [`build_benchmark`].
pub const BENCHMARK_NOISE_SIGMA: f64 = 0.35;
pub const DEFAULT_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Upsampler {
    Nearest,
    Bilinear,
    /// Zero insertion followed by a fixed 3×3 kernel whose taps do not sum
    /// evenly over the four output phases, the usual checkerboard source.
    ZeroInsertConv,
}

impl Upsampler {
    pub const ALL: [Upsampler; 3] = [Upsampler::Nearest, Upsampler::Bilinear, Upsampler::ZeroInsertConv];

    pub fn tag(&self) -> &'static str {
        match self {
            Upsampler::Nearest => "nearest",
            Upsampler::Bilinear => "bilinear",
            Upsampler::ZeroInsertConv => "zero_insert_conv",
        }
    }
}

impl fmt::Display for Upsampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Upsampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Upsampler::ALL
            .into_iter()
            .find(|u| u.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown upsampler {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    A,
    B,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::A => "A",
            Family::B => "B",
        }
    }

    pub fn brightness(&self) -> f64 {
        match self {
            Family::A => -FAMILY_BRIGHTNESS,
            Family::B => FAMILY_BRIGHTNESS,
        }
    }

    pub fn other(&self) -> Family {
        match self {
            Family::A => Family::B,
            Family::B => Family::A,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Family::A),
            "B" => Ok(Family::B),
            _ => Err(Error::InvalidArgument(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceKind {
    Real,
    Fake(Upsampler),
}

impl SourceKind {
    /// Real images are label 0, generated ones label 1.
    pub fn label(&self) -> u8 {
        match self {
            SourceKind::Real => 0,
            SourceKind::Fake(_) => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SourceKind::Real => "real",
            SourceKind::Fake(u) => u.tag(),
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "real" {
            Ok(SourceKind::Real)
        } else {
            s.parse().map(SourceKind::Fake)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: SourceKind,
    pub family: Family,
    pub brightness_shift: f64,
    pub noise_sigma: f64,
    pub size: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || self.size % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "generator size must be even and ≥ 2, got {}",
                self.size
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.brightness_shift.is_finite() {
            return Err(Error::InvalidArgument(
                "noise_sigma must be ≥ 0 and brightness finite".into(),
            ));
        }
        Ok(())
    }
}

/// Render any spec, dispatching on its kind.
pub fn generate(spec: &GeneratorSpec) -> Result<Image8> {
    match spec.kind {
        SourceKind::Real => gen_real(spec),
        SourceKind::Fake(_) => gen_fake(spec),
    }
}

pub fn gen_real(spec: &GeneratorSpec) -> Result<Image8> {
    spec.validate()?;
    if spec.kind != SourceKind::Real {
        return Err(Error::InvalidArgument("gen_real needs a real spec".into()));
    }
    let mut r = rng::seeded(spec.seed);
    let content = smooth_content(spec.size, &mut r);
    Ok(finish(spec, content, &mut r))
}

pub fn gen_fake(spec: &GeneratorSpec) -> Result<Image8> {
    spec.validate()?;
    let SourceKind::Fake(up) = spec.kind else {
        return Err(Error::InvalidArgument("gen_fake needs a fake spec".into()));
    };
    let mut r = rng::seeded(spec.seed);
    let half = smooth_content(spec.size / 2, &mut r);
    let content = half.map(|plane| upsample2(&plane, spec.size / 2, up));
    Ok(finish(spec, content, &mut r))
}

/// Three row-major `n`×`n` planes: a shared blurred luminance field plus a
/// weaker independent field per channel, around a jittered mid-grey.
fn smooth_content(n: usize, r: &mut SplitMix64) -> [Vec<f64>; 3] {
    let sigma = rng::uniform(r, BLUR_SIGMA_RANGE.0, BLUR_SIGMA_RANGE.1);
    let level = BASE_LEVEL + rng::uniform(r, -SCENE_JITTER, SCENE_JITTER);
    let lum = blurred_field(n, sigma, FIELD_CONTRAST, r);
    std::array::from_fn(|ch| {
        let chroma = blurred_field(n, sigma, CHROMA_CONTRAST, r);
        let base = level + COLOR_BALANCE[ch];
        lum.iter().zip(&chroma).map(|(l, c)| base + l + c).collect()
    })
}

/// White Gaussian noise, Gaussian-blurred (circular borders), rescaled to
/// zero mean and standard deviation `contrast`.
fn blurred_field(n: usize, sigma: f64, contrast: f64, r: &mut SplitMix64) -> Vec<f64> {
    let noise: Vec<f64> = (0..n * n).map(|_| rng::normal(r)).collect();
    let mut field = gaussian_blur(&noise, n, n, sigma);
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let var = field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / field.len() as f64;
    let scale = if var > 0.0 { contrast / var.sqrt() } else { 0.0 };
    field.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    field
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn gaussian_blur(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * plane[y * w + wrap(x as isize + t as isize - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * tmp[wrap(y as isize + t as isize - radius, h) * w + x])
                .sum();
        }
    }
    out
}

/// ×2 upsampling of a square `n`×`n` plane. Taps wrap around the borders,
/// so periodic content stays periodic.
fn upsample2(plane: &[f64], n: usize, up: Upsampler) -> Vec<f64> {
    let m = 2 * n;
    let at = |y: isize, x: isize| plane[wrap(y, n) * n + wrap(x, n)];
    let mut out = vec![0.0; m * m];
    match up {
        Upsampler::Nearest => {
            for y in 0..m {
                for x in 0..m {
                    out[y * m + x] = plane[(y / 2) * n + x / 2];
                }
            }
        }
        Upsampler::Bilinear => {
            // Half-pixel centres: output o samples source coordinate o/2 - 1/4.
            let taps = |o: usize| {
                let i = (o / 2) as isize;
                if o % 2 == 0 {
                    (i - 1, i, 0.25, 0.75)
                } else {
                    (i, i + 1, 0.75, 0.25)
                }
            };
            for y in 0..m {
                let (y0, y1, wy0, wy1) = taps(y);
                for x in 0..m {
                    let (x0, x1, wx0, wx1) = taps(x);
                    out[y * m + x] = wy0 * (wx0 * at(y0, x0) + wx1 * at(y0, x1))
                        + wy1 * (wx0 * at(y1, x0) + wx1 * at(y1, x1));
                }
            }
        }
        Upsampler::ZeroInsertConv => {
            const KERNEL: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 3.0, 2.0], [1.0, 2.0, 1.0]];
            // Average gain over the four phases is (3 + 4 + 4 + 4) / 4.
            const NORM: f64 = 3.75;
            let zero_inserted = |y: isize, x: isize| {
                if y.rem_euclid(2) == 0 && x.rem_euclid(2) == 0 {
                    at(y / 2, x / 2)
                } else {
                    0.0
                }
            };
            for y in 0..m as isize {
                for x in 0..m as isize {
                    let mut acc = 0.0;
                    for (dy, row) in KERNEL.iter().enumerate() {
                        for (dx, kv) in row.iter().enumerate() {
                            acc += kv * zero_inserted(y + dy as isize - 1, x + dx as isize - 1);
                        }
                    }
                    out[y as usize * m + x as usize] = acc / NORM;
                }
            }
        }
    }
    out
}

/// Family ramp, brightness shift and sensor noise, then quantization.
fn finish(spec: &GeneratorSpec, content: [Vec<f64>; 3], r: &mut SplitMix64) -> Image8 {
    let n = spec.size;
    let mut data = Vec::with_capacity(n * n * 3);
    for y in 0..n {
        for x in 0..n {
            let t = match spec.family {
                Family::A => x as f64 / n as f64,
                Family::B => y as f64 / n as f64,
            };
            // One full period across the image: peak-to-peak RAMP_AMPLITUDE,
            // confined to the lowest frequency bin.
            let ramp = -0.5 * RAMP_AMPLITUDE * (std::f64::consts::TAU * t).cos();
            for plane in &content {
                let noise = if spec.noise_sigma > 0.0 {
                    spec.noise_sigma * rng::normal(r)
                } else {
                    0.0
                };
                let v = plane[y * n + x] + ramp + spec.brightness_shift + noise;
                data.push(image::quantize_sample(v));
            }
        }
    }
    Image8::new(n, n, data).expect("generator produces n×n×3 samples")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub label: u8,
    pub generator: SourceKind,
    pub family: Family,
    pub seed: u64,
}

/// A labelled image list plus the parameters needed to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    pub config: BenchmarkConfig,
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const MANIFEST_META_FILE: &str = "manifest.meta";
const MANIFEST_HEADER: &str = "path,label,generator,family,seed";

impl DatasetManifest {
    /// The generator spec that reproduces `entry`.
    pub fn spec_for(&self, entry: &ManifestEntry) -> GeneratorSpec {
        GeneratorSpec {
            kind: entry.generator,
            family: entry.family,
            brightness_shift: entry.family.brightness(),
            noise_sigma: self.config.noise_sigma,
            size: self.config.size,
            seed: entry.seed,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.path.display(),
                e.label,
                e.generator.tag(),
                e.family.tag(),
                e.seed
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<ManifestEntry>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == MANIFEST_HEADER => {}
            _ => return Err(Error::Manifest(format!("expected header {MANIFEST_HEADER:?}"))),
        }
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |msg: String| Error::Manifest(format!("line {}: {msg}", i + 2));
            let cols: Vec<&str> = line.trim_end().split(',').collect();
            let [path, label, generator, family, seed] = cols[..] else {
                return Err(bad(format!("expected 5 columns, got {}", cols.len())));
            };
            let generator: SourceKind = generator.parse().map_err(|e: Error| bad(e.to_string()))?;
            let label: u8 = label.parse().map_err(|_| bad(format!("bad label {label:?}")))?;
            if label != generator.label() {
                return Err(bad(format!("label {label} contradicts generator {}", generator.tag())));
            }
            if !seen.insert(path.to_string()) {
                return Err(bad(format!("duplicate path {path}")));
            }
            entries.push(ManifestEntry {
                path: PathBuf::from(path),
                label,
                generator,
                family: family.parse().map_err(|e: Error| bad(e.to_string()))?,
                seed: seed.parse().map_err(|_| bad(format!("bad seed {seed:?}")))?,
            });
        }
        Ok(entries)
    }

    /// Read `manifest.csv` (and `manifest.meta` when present) from `dir`.
    pub fn read(dir: &Path) -> Result<Self> {
        let csv_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let entries = Self::parse_csv(&text)?;
        let meta_path = dir.join(MANIFEST_META_FILE);
        let (seed, config) = match std::fs::read_to_string(&meta_path) {
            Ok(meta) => BenchmarkConfig::parse_meta(&meta)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (0, BenchmarkConfig::default()),
            Err(e) => return Err(Error::io(&meta_path, e)),
        };
        Ok(Self {
            entries,
            seed,
            config,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv_path = dir.join(MANIFEST_FILE);
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let meta_path = dir.join(MANIFEST_META_FILE);
        std::fs::write(&meta_path, self.config.to_meta(self.seed)).map_err(|e| Error::io(&meta_path, e))
    }

    /// Render every entry in manifest order.
    pub fn render(&self) -> Result<Vec<Image8>> {
        self.entries.par_iter().map(|e| generate(&self.spec_for(e))).collect()
    }

    /// Load every entry's image from disk, in manifest order.
    pub fn load_images(&self, dir: &Path) -> Result<Vec<Image8>> {
        self.entries
            .par_iter()
            .map(|e| image::read_ppm(&dir.join(&e.path)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub train_upsampler: Upsampler,
    pub test_upsampler: Upsampler,
    /// Tie family to label in training and swap it at test time.
    pub confound: bool,
    pub n_per_class: usize,
    pub size: usize,
    pub noise_sigma: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            train_upsampler: Upsampler::Nearest,
            test_upsampler: Upsampler::Bilinear,
            confound: true,
            n_per_class: 500,
            size: DEFAULT_SIZE,
            noise_sigma: BENCHMARK_NOISE_SIGMA,
        }
    }
}

impl BenchmarkConfig {
    fn to_meta(&self, seed: u64) -> String {
        format!(
            "seed={seed}\ntrain_upsampler={}\ntest_upsampler={}\nconfound={}\nn_per_class={}\nsize={}\nnoise_sigma={}\nfamily_brightness={}\n",
            self.train_upsampler,
            self.test_upsampler,
            self.confound,
            self.n_per_class,
            self.size,
            self.noise_sigma,
            FAMILY_BRIGHTNESS
        )
    }

    fn parse_meta(text: &str) -> Result<(u64, Self)> {
        let mut cfg = Self::default();
        let mut seed = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Manifest(format!("bad meta line {line:?}")))?;
            let bad = || Error::Manifest(format!("bad meta value {line:?}"));
            match k {
                "seed" => seed = v.parse().map_err(|_| bad())?,
                "train_upsampler" => cfg.train_upsampler = v.parse()?,
                "test_upsampler" => cfg.test_upsampler = v.parse()?,
                "confound" => cfg.confound = v.parse().map_err(|_| bad())?,
                "n_per_class" => cfg.n_per_class = v.parse().map_err(|_| bad())?,
                "size" => cfg.size = v.parse().map_err(|_| bad())?,
                "noise_sigma" => cfg.noise_sigma = v.parse().map_err(|_| bad())?,
                "family_brightness" => {}
                _ => return Err(Error::Manifest(format!("unknown meta key {k:?}"))),
            }
        }
        Ok((seed, cfg))
    }
}

/// Train and test manifests for a cross-upsampler split.
///
/// Both splits hold `n_per_class` reals followed by `n_per_class` fakes.
/// With `confound`, training reals are family A and training fakes family B,
/// and the test split swaps them, so only the upsampling trace predicts the
/// label at test time. Without it, families are drawn uniformly per image in
/// both splits.
pub fn build_benchmark(cfg: &BenchmarkConfig, seed: u64) -> Result<(DatasetManifest, DatasetManifest)> {
    if cfg.n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be ≥ 1".into()));
    }
    GeneratorSpec {
        kind: SourceKind::Real,
        family: Family::A,
        brightness_shift: 0.0,
        noise_sigma: cfg.noise_sigma,
        size: cfg.size,
        seed,
    }
    .validate()?;

    let split = |name: &str, fake: Upsampler, real_family: Family| {
        let split_seed = rng::derive_seed(seed, name, 0);
        let mut family_rng = rng::seeded(rng::derive_seed(split_seed, "family", 0));
        let entries = (0..2 * cfg.n_per_class)
            .map(|i| {
                let kind = if i < cfg.n_per_class {
                    SourceKind::Real
                } else {
                    SourceKind::Fake(fake)
                };
                let family = if cfg.confound {
                    match kind {
                        SourceKind::Real => real_family,
                        SourceKind::Fake(_) => real_family.other(),
                    }
                } else if rng::below(&mut family_rng, 2) == 0 {
                    Family::A
                } else {
                    Family::B
                };
                ManifestEntry {
                    path: PathBuf::from(format!("{i:05}_{}.ppm", kind.tag())),
                    label: kind.label(),
                    generator: kind,
                    family,
                    seed: rng::derive_seed(split_seed, "image", i as u64),
                }
            })
            .collect();
        DatasetManifest {
            entries,
            seed,
            config: *cfg,
        }
    };
    Ok((
        split("train", cfg.train_upsampler, Family::A),
        split("test", cfg.test_upsampler, Family::B),
    ))
}

/// Render both splits into `out/train` and `out/test`, each with its own
/// `manifest.csv` and `manifest.meta`.
pub fn write_benchmark(out: &Path, cfg: &BenchmarkConfig, seed: u64) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train, test) = build_benchmark(cfg, seed)?;
    for (name, manifest) in [("train", &train), ("test", &test)] {
        let dir = out.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        manifest.entries.par_iter().try_for_each(|e| {
            let img = generate(&manifest.spec_for(e))?;
            image::write_ppm(&dir.join(&e.path), &img)
        })?;
        manifest.write(&dir)?;
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::to_float;
    use crate::mapping::{apply_mapping, build_fixed_table};
    use crate::spectral::{azimuthal_profile, band_ratio, image_power_spectrum, mean_spectrum};

    fn spec(kind: SourceKind, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            kind,
            family: Family::A,
            brightness_shift: 0.0,
            noise_sigma: 0.0,
            size: 64,
            seed,
        }
    }

    fn ratio(img: &Image8) -> f64 {
        band_ratio(&azimuthal_profile(&image_power_spectrum(&to_float(img)).unwrap())).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [SourceKind::Real, SourceKind::Fake(Upsampler::Bilinear)] {
            let s = GeneratorSpec {
                noise_sigma: 1.0,
                ..spec(kind, 11)
            };
            assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
            assert_ne!(generate(&s).unwrap(), generate(&GeneratorSpec { seed: 12, ..s }).unwrap());
        }
    }

    #[test]
    fn kind_mismatch_and_bad_size_rejected() {
        assert!(gen_real(&spec(SourceKind::Fake(Upsampler::Nearest), 0)).is_err());
        assert!(gen_fake(&spec(SourceKind::Real, 0)).is_err());
        assert!(gen_real(&GeneratorSpec { size: 63, ..spec(SourceKind::Real, 0) }).is_err());
        assert!(gen_real(&GeneratorSpec { noise_sigma: -1.0, ..spec(SourceKind::Real, 0) }).is_err());
    }

    #[test]
    fn real_images_are_smooth_and_varied() {
        for seed in 0..100 {
            let img = gen_real(&spec(SourceKind::Real, seed)).unwrap();
            assert!(ratio(&img) < 0.1, "seed {seed}");
            let mut levels = [false; 256];
            img.data().iter().for_each(|&v| levels[v as usize] = true);
            assert!(levels.iter().filter(|&&b| b).count() > 30, "seed {seed}");
        }
    }

    #[test]
    fn nearest_fakes_are_blocky() {
        let mut r = rng::seeded(3);
        let half = smooth_content(32, &mut r);
        let up = upsample2(&half[0], 32, Upsampler::Nearest);
        for y in (0..64).step_by(2) {
            for x in (0..64).step_by(2) {
                let v = up[y * 64 + x];
                assert_eq!(v, up[y * 64 + x + 1]);
                assert_eq!(v, up[(y + 1) * 64 + x]);
                assert_eq!(v, up[(y + 1) * 64 + x + 1]);
            }
        }
    }

    #[test]
    fn upsamplers_preserve_constants() {
        let plane = vec![7.0; 16];
        for up in [Upsampler::Nearest, Upsampler::Bilinear] {
            assert!(upsample2(&plane, 4, up).iter().all(|&v| (v - 7.0).abs() < 1e-12));
        }
        // The checkerboard kernel has uneven phase gains.
        let z = upsample2(&plane, 4, Upsampler::ZeroInsertConv);
        assert!((z[2 * 8 + 2] - 7.0 * 3.0 / 3.75).abs() < 1e-12);
        assert!((z[2 * 8 + 3] - 7.0 * 4.0 / 3.75).abs() < 1e-12);
        assert!((z[3 * 8 + 3] - 7.0 * 4.0 / 3.75).abs() < 1e-12);
    }

    /// A top-third radius that beats both neighbours and stands at least
    /// twice as high as the lowest top-third value before it, so the flat
    /// quantization floor's ripple does not count.
    fn has_peak_in_top_third(values: &[f64]) -> bool {
        let r_max = values.len() - 1;
        let start = r_max + 1 - r_max / 3;
        (start + 1..=r_max).any(|r| {
            let floor = values[start..r].iter().cloned().fold(f64::INFINITY, f64::min);
            values[r] > values[r - 1] && (r == r_max || values[r] > values[r + 1]) && values[r] >= 2.0 * floor
        })
    }

    #[test]
    fn checkerboard_fakes_have_high_frequency_peak() {
        let fakes: Vec<_> = (0..20)
            .map(|s| to_float(&gen_fake(&spec(SourceKind::Fake(Upsampler::ZeroInsertConv), s)).unwrap()))
            .collect();
        let reals: Vec<_> = (0..20)
            .map(|s| to_float(&gen_real(&spec(SourceKind::Real, s)).unwrap()))
            .collect();
        let fake_profile = azimuthal_profile(&mean_spectrum(&fakes).unwrap());
        let real_profile = azimuthal_profile(&mean_spectrum(&reals).unwrap());
        assert!(has_peak_in_top_third(&fake_profile.values));
        assert!(!has_peak_in_top_third(&real_profile.values));
    }

    fn welch_t(a: &[f64], b: &[f64]) -> f64 {
        let stats = |x: &[f64]| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n)
        };
        let ((ma, va), (mb, vb)) = (stats(a), stats(b));
        (ma - mb) / (va + vb).sqrt()
    }

    #[test]
    fn fake_and_real_profiles_separate_at_high_radii() {
        // Per-image mean power over the top third of radii. Bilinear fakes
        // differ from reals only through a modest extra blur, so the groups
        // need to be large.
        let top = |kind, family, offset: u64| -> Vec<f64> {
            (0..400u64)
                .map(|s| {
                    let img = generate(&GeneratorSpec {
                        family,
                        noise_sigma: BENCHMARK_NOISE_SIGMA,
                        ..spec(kind, s + offset)
                    })
                    .unwrap();
                    let p = azimuthal_profile(&image_power_spectrum(&to_float(&img)).unwrap());
                    let r = p.max_radius();
                    let tail = &p.values[r + 1 - r / 3..];
                    tail.iter().sum::<f64>() / tail.len() as f64
                })
                .collect()
        };
        let real_a = top(SourceKind::Real, Family::A, 0);
        let real_b = top(SourceKind::Real, Family::B, 10_000);
        let t = welch_t(&real_a, &real_b);
        assert!(t.abs() < 3.0, "real A vs real B: t = {t}");
        for up in Upsampler::ALL {
            let fake = top(SourceKind::Fake(up), Family::A, 20_000);
            let t = welch_t(&fake, &real_a);
            assert!(t.abs() > 4.0, "{up}: t = {t}");
        }
    }

    #[test]
    fn fixed_mapping_raises_band_ratio() {
        for seed in 0..20 {
            let img = gen_real(&spec(SourceKind::Real, seed)).unwrap();
            let mapped = apply_mapping(&img, &[build_fixed_table()]).unwrap();
            let mr = band_ratio(&azimuthal_profile(&image_power_spectrum(&mapped).unwrap())).unwrap();
            assert!(mr > ratio(&img));
        }
    }

    #[test]
    fn benchmark_construction() {
        let cfg = BenchmarkConfig {
            n_per_class: 100,
            ..BenchmarkConfig::default()
        };
        let (train, test) = build_benchmark(&cfg, 1).unwrap();
        assert_eq!(train.entries.len(), 200);
        assert_eq!(test.entries.len(), 200);
        for m in [&train, &test] {
            assert_eq!(m.entries.iter().filter(|e| e.label == 1).count(), 100);
            for e in &m.entries {
                assert_eq!(e.label, e.generator.label());
            }
        }
        assert!(train
            .entries
            .iter()
            .all(|e| (e.label == 0) == (e.family == Family::A)));
        assert!(test
            .entries
            .iter()
            .all(|e| (e.label == 0) == (e.family == Family::B)));
        assert!(test
            .entries
            .iter()
            .filter(|e| e.label == 1)
            .all(|e| e.generator == SourceKind::Fake(Upsampler::Bilinear)));
        assert_eq!(build_benchmark(&cfg, 1).unwrap(), (train, test));
        assert!(build_benchmark(&BenchmarkConfig { n_per_class: 0, ..cfg }, 1).is_err());
    }

    #[test]
    fn unconfounded_families_are_mixed() {
        let cfg = BenchmarkConfig {
            n_per_class: 200,
            confound: false,
            ..BenchmarkConfig::default()
        };
        let (train, test) = build_benchmark(&cfg, 4).unwrap();
        for m in [&train, &test] {
            for label in [0, 1] {
                let group: Vec<_> = m.entries.iter().filter(|e| e.label == label).collect();
                let a = group.iter().filter(|e| e.family == Family::A).count();
                assert!((60..140).contains(&a), "label {label}: {a} of {}", group.len());
            }
        }
    }

    /// Best single brightness threshold on `train`, applied unchanged to `test`.
    fn threshold_accuracies(train: &[(f64, u8)], test: &[(f64, u8)]) -> (f64, f64) {
        let acc = |set: &[(f64, u8)], t: f64, bright_is_fake: bool| {
            set.iter()
                .filter(|&&(m, y)| ((m > t) == bright_is_fake) == (y == 1))
                .count() as f64
                / set.len() as f64
        };
        let mut best = (0.0, 0.0, true);
        for &(t, _) in train {
            for dir in [true, false] {
                let a = acc(train, t, dir);
                if a > best.0 {
                    best = (a, t, dir);
                }
            }
        }
        (best.0, acc(test, best.1, best.2))
    }

    #[test]
    fn brightness_shortcut_fails_under_swap() {
        let cfg = BenchmarkConfig {
            n_per_class: 100,
            ..BenchmarkConfig::default()
        };
        let (train, test) = build_benchmark(&cfg, 1).unwrap();
        let stats = |m: &DatasetManifest| -> Vec<(f64, u8)> {
            m.render()
                .unwrap()
                .iter()
                .zip(&m.entries)
                .map(|(img, e)| (img.mean(), e.label))
                .collect()
        };
        let (train_acc, test_acc) = threshold_accuracies(&stats(&train), &stats(&test));
        assert!(train_acc > 0.9, "train {train_acc}");
        assert!(test_acc < 0.5, "test {test_acc}");
    }

    #[test]
    fn manifest_csv_round_trip_and_validation() {
        let (train, _) = build_benchmark(&BenchmarkConfig { n_per_class: 3, ..Default::default() }, 9).unwrap();
        let csv = train.to_csv();
        assert!(csv.starts_with("path,label,generator,family,seed\n"));
        assert_eq!(DatasetManifest::parse_csv(&csv).unwrap(), train.entries);

        let wrong_label = csv.replacen(",0,real,", ",1,real,", 1);
        assert!(DatasetManifest::parse_csv(&wrong_label).is_err());
        let first_row = csv.lines().nth(1).unwrap();
        let dup = format!("{csv}{first_row}\n");
        assert!(DatasetManifest::parse_csv(&dup).is_err());
        assert!(DatasetManifest::parse_csv("a,b\n").is_err());
    }

    #[test]
    fn written_benchmark_regenerates_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = BenchmarkConfig {
            n_per_class: 4,
            ..Default::default()
        };
        write_benchmark(dir.path(), &cfg, 5).unwrap();
        let train_dir = dir.path().join("train");
        let m = DatasetManifest::read(&train_dir).unwrap();
        assert_eq!(m.config, cfg);
        assert_eq!(m.seed, 5);
        let rendered = m.render().unwrap();
        for (e, img) in m.entries.iter().zip(&rendered) {
            let bytes = std::fs::read(train_dir.join(&e.path)).unwrap();
            assert_eq!(bytes, image::encode_ppm(img));
        }
    }
}
