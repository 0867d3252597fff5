//! Frequency diagnostics: 2-D DFT, DC-centered power spectra, mean spectra
//! over image sets, and the azimuthal (radial) profile.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::image::ImageF;
use crate::{Error, Result};

/// Forward 2-D DFT of a row-major `height`×`width` plane,
/// `X[k, l] = Σ x[m, n] e^{-2πi(km/H + ln/W)}`.
pub fn dft2(channel: &[f64], height: usize, width: usize) -> Result<Vec<Complex64>> {
    check_plane(channel.len(), height, width)?;
    let mut buf: Vec<Complex64> = channel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, height, width, false);
    Ok(buf)
}

/// Inverse 2-D DFT including the `1/(HW)` normalization.
pub fn idft2(spectrum: &[Complex64], height: usize, width: usize) -> Result<Vec<Complex64>> {
    check_plane(spectrum.len(), height, width)?;
    let mut buf = spectrum.to_vec();
    fft2_in_place(&mut buf, height, width, true);
    let norm = 1.0 / (height * width) as f64;
    buf.iter_mut().for_each(|v| *v *= norm);
    Ok(buf)
}

fn check_plane(len: usize, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!("empty plane {height}x{width}")));
    }
    if len != height * width {
        return Err(Error::DimensionMismatch(format!(
            "{height}x{width} plane needs {} samples, got {len}",
            height * width
        )));
    }
    Ok(())
}

fn fft2_in_place(buf: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex64::default(); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = buf[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            buf[y * width + x] = column[y];
        }
    }
}

/// Non-negative power on a DC-centered grid: DC sits at
/// `(height / 2, width / 2)` (integer division).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum2D {
    height: usize,
    width: usize,
    power: Vec<f64>,
}

impl Spectrum2D {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.power[y * self.width + x]
    }

    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// `log10(1 + p)` scaled so the brightest bin is 255, as P5 samples.
    pub fn log_heatmap(&self) -> Vec<u8> {
        let logs: Vec<f64> = self.power.iter().map(|p| p.ln_1p()).collect();
        let max = logs.iter().copied().fold(0.0f64, f64::max);
        if max <= 0.0 {
            return vec![0; logs.len()];
        }
        logs.iter()
            .map(|l| crate::image::quantize_sample(l / max * 255.0))
            .collect()
    }
}

/// `|DFT|²`, quadrant-swapped so the DC bin lands at the center.
pub fn power_spectrum(channel: &[f64], height: usize, width: usize) -> Result<Spectrum2D> {
    let spec = dft2(channel, height, width)?;
    let (cy, cx) = (height / 2, width / 2);
    let mut power = vec![0.0; height * width];
    for k in 0..height {
        let y = (k + cy) % height;
        for l in 0..width {
            let x = (l + cx) % width;
            power[y * width + x] = spec[k * width + l].norm_sqr();
        }
    }
    Ok(Spectrum2D {
        height,
        width,
        power,
    })
}

/// Channel-averaged power spectrum of one image.
pub fn image_power_spectrum(img: &ImageF) -> Result<Spectrum2D> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut acc = vec![0.0; h * w];
    for ch in 0..c {
        let s = power_spectrum(&img.channel(ch), h, w)?;
        acc.iter_mut().zip(&s.power).for_each(|(a, p)| *a += p);
    }
    acc.iter_mut().for_each(|a| *a /= c as f64);
    Ok(Spectrum2D {
        height: h,
        width: w,
        power: acc,
    })
}

/// Element-wise mean of per-image, channel-averaged power spectra. Summation
/// follows input order.
pub fn mean_spectrum(images: &[ImageF]) -> Result<Spectrum2D> {
    let first = images
        .first()
        .ok_or_else(|| Error::Empty("mean_spectrum needs at least one image".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut acc = vec![0.0; h * w];
    for (i, img) in images.iter().enumerate() {
        if img.height() != h || img.width() != w {
            return Err(Error::DimensionMismatch(format!(
                "image {i} is {}x{}, expected {h}x{w}",
                img.height(),
                img.width()
            )));
        }
        let s = image_power_spectrum(img)?;
        acc.iter_mut().zip(&s.power).for_each(|(a, p)| *a += p);
    }
    let n = images.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Spectrum2D {
        height: h,
        width: w,
        power: acc,
    })
}

/// Mean power per integer frequency radius, with the number of bins that
/// fell into each ring.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    pub fn max_radius(&self) -> usize {
        self.values.len() - 1
    }

    /// Total power per ring (`mean × count`).
    pub fn sums(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.counts)
            .map(|(v, &n)| v * n as f64)
            .collect()
    }

    /// `radius,mean_power,count` with a header line. With `log` the middle
    /// column holds `log10(mean_power)` and the header says so.
    pub fn to_csv(&self, log: bool) -> String {
        let mut out = String::from(if log {
            "radius,log10_mean_power,count\n"
        } else {
            "radius,mean_power,count\n"
        });
        for (r, (v, n)) in self.values.iter().zip(&self.counts).enumerate() {
            let shown = if log { v.log10() } else { *v };
            out.push_str(&format!("{r},{shown},{n}\n"));
        }
        out
    }
}

/// Rings are indexed by the rounded Euclidean distance to the DC bin and
/// reported for radii `0..=min(H, W) / 2`. Corner bins whose rounded distance
/// exceeds that radius are folded into the outermost ring, so
/// `Σ values[r]·counts[r]` equals the total power.
pub fn azimuthal_profile(spec: &Spectrum2D) -> RadialProfile {
    let max_r = spec.height.min(spec.width) / 2;
    let (cy, cx) = spec.center();
    let mut sums = vec![0.0; max_r + 1];
    let mut counts = vec![0usize; max_r + 1];
    for y in 0..spec.height {
        let dy = y as f64 - cy as f64;
        for x in 0..spec.width {
            let dx = x as f64 - cx as f64;
            let r = ((dy * dy + dx * dx).sqrt().round() as usize).min(max_r);
            sums[r] += spec.get(y, x);
            counts[r] += 1;
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s / n as f64)
        .collect();
    RadialProfile { values, counts }
}

/// Mean ring power over the top third of radii divided by mean ring power
/// over radii `1..=R/3`, where `R` is the largest radius. DC is excluded.
pub fn band_ratio(profile: &RadialProfile) -> Result<f64> {
    if profile.values.len() < 6 {
        return Err(Error::InvalidArgument(format!(
            "band_ratio needs at least 6 radii, got {}",
            profile.values.len()
        )));
    }
    let r_max = profile.max_radius();
    let third = r_max / 3;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let low = mean(&profile.values[1..=third]);
    let high = mean(&profile.values[r_max + 1 - third..=r_max]);
    if !(low > 0.0) {
        return Err(Error::DegenerateSpectrum(
            "no power in the low-frequency band".into(),
        ));
    }
    Ok(high / low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    fn naive_dft2(x: &[f64], h: usize, w: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); h * w];
        for k in 0..h {
            for l in 0..w {
                let mut acc = Complex64::default();
                for m in 0..h {
                    for n in 0..w {
                        let phase = -2.0 * PI * ((k * m) as f64 / h as f64 + (l * n) as f64 / w as f64);
                        acc += Complex64::from_polar(x[m * w + n], phase);
                    }
                }
                out[k * w + l] = acc;
            }
        }
        out
    }

    fn random_plane(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect()
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let x = vec![2.5; 6 * 4];
        let s = dft2(&x, 6, 4).unwrap();
        assert!((s[0] - Complex64::new(2.5 * 24.0, 0.0)).norm() < 1e-12);
        assert!(s[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let mut x = vec![0.0; 5 * 7];
        x[0] = 1.0;
        let s = dft2(&x, 5, 7).unwrap();
        assert!(s.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn dft_matches_naive_oracle() {
        for seed in 0..5 {
            for (h, w) in [(8, 8), (5, 3), (6, 9)] {
                let x = random_plane(seed, h * w);
                let fast = dft2(&x, h, w).unwrap();
                let slow = naive_dft2(&x, h, w);
                let err = fast
                    .iter()
                    .zip(&slow)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-9, "{h}x{w}: {err}");
            }
        }
    }

    #[test]
    fn inverse_and_parseval() {
        for (h, w) in [(1, 1), (3, 7), (16, 16), (64, 64)] {
            let x = random_plane(11, h * w);
            let s = dft2(&x, h, w).unwrap();
            let back = idft2(&s, h, w).unwrap();
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err: f64 = back
                .iter()
                .zip(&x)
                .map(|(b, v)| (b - Complex64::new(*v, 0.0)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-9 * norm);
            let e_time: f64 = x.iter().map(|v| v * v).sum();
            let e_freq: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / (h * w) as f64;
            assert!((e_time - e_freq).abs() <= 1e-9 * e_time);
        }
    }

    #[test]
    fn dft_rejects_bad_shapes() {
        assert!(dft2(&[1.0, 2.0], 3, 1).is_err());
        assert!(dft2(&[], 0, 0).is_err());
    }

    #[test]
    fn power_spectrum_centering() {
        let s = power_spectrum(&vec![1.0; 8 * 6], 8, 6).unwrap();
        assert_eq!(s.center(), (4, 3));
        assert!((s.get(4, 3) - 48.0 * 48.0).abs() < 1e-9);
        let others: f64 = s.power().iter().sum::<f64>() - s.get(4, 3);
        assert!(others.abs() < 1e-9);

        let mut impulse = vec![0.0; 8 * 6];
        impulse[0] = 1.0;
        let s = power_spectrum(&impulse, 8, 6).unwrap();
        assert!(s.power().iter().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn nyquist_checkerboard_lands_in_corner() {
        let n = 8;
        let x: Vec<f64> = (0..n * n)
            .map(|i| if (i / n + i % n) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let s = power_spectrum(&x, n, n).unwrap();
        // Uncentered (4, 4) shifts to (0, 0): the corner-most bin.
        assert!((s.get(0, 0) - 64.0 * 64.0).abs() < 1e-9);
        assert!((s.total() - s.get(0, 0)).abs() < 1e-9);
        let prof = azimuthal_profile(&s);
        let last = prof.max_radius();
        assert!(prof.values[last] > 0.0);
        assert!(prof.values[..last].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn real_input_has_point_symmetric_spectrum() {
        let (h, w) = (8, 10);
        let s = power_spectrum(&random_plane(4, h * w), h, w).unwrap();
        // Centered index i holds frequency i - h/2; its conjugate partner
        // h/2 - i sits at index h - i (mod h).
        for y in 0..h {
            for x in 0..w {
                let (my, mx) = ((h - y) % h, (w - x) % w);
                assert!((s.get(y, x) - s.get(my, mx)).abs() < 1e-9 * (1.0 + s.get(y, x)));
            }
        }
    }

    #[test]
    fn mean_spectrum_cases() {
        let a = ImageF::from_fn(4, 4, 1, |y, x, _| (y * 4 + x) as f64);
        let b = ImageF::from_fn(4, 4, 1, |y, x, _| if (x + y) % 2 == 0 { 3.0 } else { -1.0 });
        let one = mean_spectrum(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one, image_power_spectrum(&a).unwrap());
        let dup = mean_spectrum(&[a.clone(), a.clone(), a.clone()]).unwrap();
        for (p, q) in dup.power().iter().zip(one.power()) {
            assert!((p - q).abs() < 1e-9 * (1.0 + q));
        }

        // Two-term average against the naive DFT.
        let avg = mean_spectrum(&[a.clone(), b.clone()]).unwrap();
        let pa = naive_dft2(a.data(), 4, 4);
        let pb = naive_dft2(b.data(), 4, 4);
        for k in 0..4 {
            for l in 0..4 {
                let expect = (pa[k * 4 + l].norm_sqr() + pb[k * 4 + l].norm_sqr()) / 2.0;
                let got = avg.get((k + 2) % 4, (l + 2) % 4);
                assert!((got - expect).abs() < 1e-9 * (1.0 + expect));
            }
        }

        assert!(matches!(mean_spectrum(&[]), Err(Error::Empty(_))));
        let c = ImageF::zeros(4, 5, 1);
        assert!(matches!(mean_spectrum(&[a, c]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn azimuthal_profile_basics() {
        let s = power_spectrum(&vec![1.0; 16 * 16], 16, 16).unwrap();
        let p = azimuthal_profile(&s);
        assert_eq!(p.values.len(), 9);
        assert!(p.values[0] > 0.0);
        assert!(p.values[1..].iter().all(|&v| v == 0.0));
        assert_eq!(p.counts.iter().sum::<usize>(), 256);
        assert!(p.counts.iter().all(|&n| n >= 1));

        let mut impulse = vec![0.0; 16 * 16];
        impulse[0] = 1.0;
        let p = azimuthal_profile(&power_spectrum(&impulse, 16, 16).unwrap());
        assert!(p.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((band_ratio(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn azimuthal_energy_accounting() {
        for (h, w) in [(16, 16), (9, 14), (32, 20)] {
            let s = power_spectrum(&random_plane(2, h * w), h, w).unwrap();
            let p = azimuthal_profile(&s);
            let total: f64 = p.sums().iter().sum();
            assert!((total - s.total()).abs() <= 1e-9 * s.total());
            assert!(p.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn band_ratio_errors() {
        let short = RadialProfile {
            values: vec![1.0; 5],
            counts: vec![1; 5],
        };
        assert!(matches!(band_ratio(&short), Err(Error::InvalidArgument(_))));
        let flat_dc = azimuthal_profile(&power_spectrum(&vec![1.0; 256], 16, 16).unwrap());
        assert!(matches!(band_ratio(&flat_dc), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn profile_csv() {
        let p = RadialProfile {
            values: vec![100.0, 10.0],
            counts: vec![1, 8],
        };
        assert_eq!(p.to_csv(false), "radius,mean_power,count\n0,100,1\n1,10,8\n");
        assert_eq!(p.to_csv(true), "radius,log10_mean_power,count\n0,2,1\n1,1,8\n");
    }
}
