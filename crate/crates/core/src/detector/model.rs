//! conv3×3 → ReLU → 2×2 mean-pool → conv3×3 → ReLU → global mean-pool →
//! affine → sigmoid, with hand-written backpropagation.
//!
//! Convolutions are valid (no padding), stride 1. Pooling drops a trailing
//! odd row or column. The smallest accepted input is 8×8.

use rayon::prelude::*;

use super::params::{DetectorParams, CONV1_OUT, CONV2_OUT, IN_CHANNELS, KERNEL};
use crate::image::ImageF;
use crate::{Error, Result};

pub const MIN_INPUT: usize = 8;
/// Probabilities are clamped to `[EPS, 1 - EPS]` inside the loss.
pub const LOSS_EPS: f64 = 1e-7;

/// N×C×H×W batch, planar per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub n: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Batch {
    /// Stack interleaved H×W×C images into planar samples. All images must
    /// share dimensions.
    pub fn from_images(images: &[ImageF]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Empty("batch needs at least one image".into()))?;
        let (h, w, c) = (first.height(), first.width(), first.channels());
        let mut data = Vec::with_capacity(images.len() * h * w * c);
        for img in images {
            if (img.height(), img.width(), img.channels()) != (h, w, c) {
                return Err(Error::ShapeMismatch("batch images differ in shape".into()));
            }
            for ch in 0..c {
                data.extend(img.data().iter().skip(ch).step_by(c));
            }
        }
        Ok(Self {
            n: images.len(),
            channels: c,
            height: h,
            width: w,
            data,
        })
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.channels * self.height * self.width;
        &self.data[i * len..(i + 1) * len]
    }

    fn check(&self) -> Result<()> {
        if self.channels != IN_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "detector expects {IN_CHANNELS} channels, got {}",
                self.channels
            )));
        }
        if self.height < MIN_INPUT || self.width < MIN_INPUT {
            return Err(Error::ShapeMismatch(format!(
                "detector input must be at least {MIN_INPUT}x{MIN_INPUT}, got {}x{}",
                self.height, self.width
            )));
        }
        if self.data.len() != self.n * self.channels * self.height * self.width {
            return Err(Error::ShapeMismatch("batch data length does not match its shape".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Dims {
    h: usize,
    w: usize,
    h1: usize,
    w1: usize,
    hp: usize,
    wp: usize,
    h2: usize,
    w2: usize,
}

impl Dims {
    fn new(h: usize, w: usize) -> Self {
        let (h1, w1) = (h - 2, w - 2);
        let (hp, wp) = (h1 / 2, w1 / 2);
        Self {
            h,
            w,
            h1,
            w1,
            hp,
            wp,
            h2: hp - 2,
            w2: wp - 2,
        }
    }
}

/// Activations kept for the backward pass.
struct Trace {
    a1: Vec<f64>,
    pooled: Vec<f64>,
    a2: Vec<f64>,
    features: [f64; CONV2_OUT],
    prob: f64,
}

/// Valid 3×3 convolution: `out[k] = b[k] + Σ_c w[k, c] ⋆ input[c]`.
fn conv3x3(
    input: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let (oh, ow) = (h - 2, w - 2);
    for (k, plane) in out.chunks_exact_mut(oh * ow).enumerate() {
        plane.fill(bias[k]);
        for c in 0..in_ch {
            let src = &input[c * h * w..(c + 1) * h * w];
            for u in 0..KERNEL {
                for v in 0..KERNEL {
                    let wt = weights[((k * in_ch + c) * KERNEL + u) * KERNEL + v];
                    for i in 0..oh {
                        let row = &src[(i + u) * w + v..(i + u) * w + v + ow];
                        let dst = &mut plane[i * ow..(i + 1) * ow];
                        dst.iter_mut().zip(row).for_each(|(d, s)| *d += wt * s);
                    }
                }
            }
        }
    }
}

/// Weight, bias and (optionally) input gradients of [`conv3x3`].
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let (oh, ow) = (h - 2, w - 2);
    for (k, g) in grad_out.chunks_exact(oh * ow).enumerate() {
        grad_b[k] += g.iter().sum::<f64>();
        for c in 0..in_ch {
            let src = &input[c * h * w..(c + 1) * h * w];
            for u in 0..KERNEL {
                for v in 0..KERNEL {
                    let idx = ((k * in_ch + c) * KERNEL + u) * KERNEL + v;
                    let mut acc = 0.0;
                    for i in 0..oh {
                        let row = &src[(i + u) * w + v..(i + u) * w + v + ow];
                        acc += row.iter().zip(&g[i * ow..(i + 1) * ow]).map(|(s, d)| s * d).sum::<f64>();
                    }
                    grad_w[idx] += acc;
                    if let Some(gi) = grad_in.as_deref_mut() {
                        let wt = weights[idx];
                        let plane = &mut gi[c * h * w..(c + 1) * h * w];
                        for i in 0..oh {
                            let dst = &mut plane[(i + u) * w + v..(i + u) * w + v + ow];
                            dst.iter_mut().zip(&g[i * ow..(i + 1) * ow]).for_each(|(d, s)| *d += wt * s);
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn forward_one(p: &DetectorParams, x: &[f64], d: Dims) -> Trace {
    let mut a1 = vec![0.0; CONV1_OUT * d.h1 * d.w1];
    conv3x3(x, IN_CHANNELS, d.h, d.w, p.conv1_w(), p.conv1_b(), &mut a1);

    let mut pooled = vec![0.0; CONV1_OUT * d.hp * d.wp];
    for k in 0..CONV1_OUT {
        let src = &a1[k * d.h1 * d.w1..(k + 1) * d.h1 * d.w1];
        for i in 0..d.hp {
            for j in 0..d.wp {
                let at = |y: usize, x: usize| src[y * d.w1 + x].max(0.0);
                pooled[(k * d.hp + i) * d.wp + j] =
                    0.25 * (at(2 * i, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j) + at(2 * i + 1, 2 * j + 1));
            }
        }
    }

    let mut a2 = vec![0.0; CONV2_OUT * d.h2 * d.w2];
    conv3x3(&pooled, CONV1_OUT, d.hp, d.wp, p.conv2_w(), p.conv2_b(), &mut a2);

    let area = (d.h2 * d.w2) as f64;
    let mut features = [0.0; CONV2_OUT];
    for (k, f) in features.iter_mut().enumerate() {
        *f = a2[k * d.h2 * d.w2..(k + 1) * d.h2 * d.w2]
            .iter()
            .map(|v| v.max(0.0))
            .sum::<f64>()
            / area;
    }
    let z = p.fc_b() + p.fc_w().iter().zip(&features).map(|(w, f)| w * f).sum::<f64>();
    Trace {
        a1,
        pooled,
        a2,
        features,
        prob: sigmoid(z),
    }
}

/// Gradient of one sample's loss term, already divided by the batch size
/// through `dz`.
fn backward_one(p: &DetectorParams, x: &[f64], d: Dims, t: &Trace, dz: f64, g: &mut DetectorParams) {
    let [g_w1, g_b1, g_w2, g_b2, g_fc, g_fcb] = g.tensors_mut();
    g_fcb[0] += dz;
    for k in 0..CONV2_OUT {
        g_fc[k] += dz * t.features[k];
    }

    let area = (d.h2 * d.w2) as f64;
    let mut d_a2 = vec![0.0; t.a2.len()];
    for k in 0..CONV2_OUT {
        let df = dz * p.fc_w()[k] / area;
        let range = k * d.h2 * d.w2..(k + 1) * d.h2 * d.w2;
        for (da, &a) in d_a2[range.clone()].iter_mut().zip(&t.a2[range]) {
            if a > 0.0 {
                *da = df;
            }
        }
    }

    let mut d_pooled = vec![0.0; t.pooled.len()];
    conv3x3_backward(
        &t.pooled,
        CONV1_OUT,
        d.hp,
        d.wp,
        p.conv2_w(),
        &d_a2,
        g_w2,
        g_b2,
        Some(&mut d_pooled),
    );

    let mut d_a1 = vec![0.0; t.a1.len()];
    for k in 0..CONV1_OUT {
        let base = k * d.h1 * d.w1;
        for i in 0..d.hp {
            for j in 0..d.wp {
                let share = 0.25 * d_pooled[(k * d.hp + i) * d.wp + j];
                for (y, x) in [(2 * i, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j), (2 * i + 1, 2 * j + 1)] {
                    let idx = base + y * d.w1 + x;
                    if t.a1[idx] > 0.0 {
                        d_a1[idx] = share;
                    }
                }
            }
        }
    }
    conv3x3_backward(x, IN_CHANNELS, d.h, d.w, p.conv1_w(), &d_a1, g_w1, g_b1, None);
}

/// Probabilities in `(0, 1)` for every sample.
pub fn forward(params: &DetectorParams, batch: &Batch) -> Result<Vec<f64>> {
    batch.check()?;
    let d = Dims::new(batch.height, batch.width);
    Ok((0..batch.n)
        .into_par_iter()
        .map(|i| forward_one(params, batch.sample(i), d).prob)
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[LOSS_EPS, 1 - LOSS_EPS]`.
pub fn loss(probs: &[f64], labels: &[u8]) -> f64 {
    let n = probs.len().max(1) as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| sample_loss(p, y))
        .sum::<f64>()
        / n
}

#[inline]
fn sample_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Loss and its exact gradient with respect to every parameter.
///
/// Per-sample gradients are computed in parallel and summed in sample
/// order, so the result does not depend on thread scheduling.
pub fn backward(params: &DetectorParams, batch: &Batch, labels: &[u8]) -> Result<(f64, DetectorParams)> {
    batch.check()?;
    if labels.len() != batch.n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch.n
        )));
    }
    let d = Dims::new(batch.height, batch.width);
    let n = batch.n as f64;
    let per_sample: Vec<(f64, DetectorParams)> = (0..batch.n)
        .into_par_iter()
        .map(|i| {
            let x = batch.sample(i);
            let t = forward_one(params, x, d);
            let y = labels[i];
            // d/dz of the clamped BCE; zero where the clamp is active.
            let dz = if t.prob > LOSS_EPS && t.prob < 1.0 - LOSS_EPS {
                (t.prob - f64::from(y)) / n
            } else {
                0.0
            };
            let mut g = DetectorParams::zeros();
            backward_one(params, x, d, &t, dz, &mut g);
            (sample_loss(t.prob, y), g)
        })
        .collect();
    let mut total = 0.0;
    let mut grad = DetectorParams::zeros();
    for (l, g) in &per_sample {
        total += l;
        grad.add_assign(g);
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_batch(n: usize, h: usize, w: usize, seed: u64) -> Batch {
        let mut r = rng::seeded(seed);
        Batch {
            n,
            channels: 3,
            height: h,
            width: w,
            data: (0..n * 3 * h * w).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect(),
        }
    }

    /// Straight-line scalar evaluation with explicit index arithmetic.
    fn scalar_forward(p: &DetectorParams, x: &[f64], h: usize, w: usize) -> f64 {
        let (w1, b1, w2, b2, fc, fcb) = (p.conv1_w(), p.conv1_b(), p.conv2_w(), p.conv2_b(), p.fc_w(), p.fc_b());
        let (oh, ow) = (h - 2, w - 2);
        let mut c1 = vec![vec![vec![0.0; ow]; oh]; 8];
        for k in 0..8 {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = b1[k];
                    for c in 0..3 {
                        for u in 0..3 {
                            for v in 0..3 {
                                s += w1[k * 27 + c * 9 + u * 3 + v] * x[c * h * w + (i + u) * w + (j + v)];
                            }
                        }
                    }
                    c1[k][i][j] = if s > 0.0 { s } else { 0.0 };
                }
            }
        }
        let (ph, pw) = (oh / 2, ow / 2);
        let mut pl = vec![vec![vec![0.0; pw]; ph]; 8];
        for k in 0..8 {
            for i in 0..ph {
                for j in 0..pw {
                    pl[k][i][j] = (c1[k][2 * i][2 * j] + c1[k][2 * i][2 * j + 1] + c1[k][2 * i + 1][2 * j]
                        + c1[k][2 * i + 1][2 * j + 1])
                        / 4.0;
                }
            }
        }
        let (qh, qw) = (ph - 2, pw - 2);
        let mut z = fcb;
        for k in 0..16 {
            let mut total = 0.0;
            for i in 0..qh {
                for j in 0..qw {
                    let mut s = b2[k];
                    for c in 0..8 {
                        for u in 0..3 {
                            for v in 0..3 {
                                s += w2[k * 72 + c * 9 + u * 3 + v] * pl[c][i + u][j + v];
                            }
                        }
                    }
                    total += if s > 0.0 { s } else { 0.0 };
                }
            }
            z += fc[k] * total / (qh * qw) as f64;
        }
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn zero_params_give_one_half() {
        let probs = forward(&DetectorParams::zeros(), &random_batch(3, 9, 12, 1)).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn constant_input_ignores_size_beyond_pooling() {
        let p = DetectorParams::init(4);
        let mk = |h: usize, w: usize| Batch {
            n: 1,
            channels: 3,
            height: h,
            width: w,
            data: vec![0.3; 3 * h * w],
        };
        let a = forward(&p, &mk(10, 10)).unwrap()[0];
        let b = forward(&p, &mk(16, 12)).unwrap()[0];
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_scalar_oracle() {
        let mut p = DetectorParams::init(9);
        p.tensors_mut()[1].iter_mut().for_each(|b| *b = 0.05);
        p.tensors_mut()[3].iter_mut().for_each(|b| *b = 0.02);
        p.tensors_mut()[5][0] = -0.1;
        for (h, w) in [(8, 8), (11, 9)] {
            let batch = random_batch(2, h, w, 5);
            let probs = forward(&p, &batch).unwrap();
            for i in 0..2 {
                let o = scalar_forward(&p, batch.sample(i), h, w);
                assert!((probs[i] - o).abs() < 1e-12, "{} vs {}", probs[i], o);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let p = DetectorParams::zeros();
        assert!(forward(&p, &random_batch(1, 7, 8, 0)).is_err());
        let mut b = random_batch(1, 8, 8, 0);
        b.channels = 1;
        assert!(forward(&p, &b).is_err());
        let b = random_batch(2, 8, 8, 0);
        assert!(backward(&p, &b, &[1]).is_err());
    }

    #[test]
    fn loss_examples() {
        assert!((loss(&[0.5], &[1]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss(&[0.5], &[0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(loss(&[1.0, 0.0], &[1, 0]) <= 1e-6);
        let expect = (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0;
        assert!((loss(&[0.9, 0.2], &[1, 0]) - expect).abs() < 1e-12);
        assert!((expect - 0.16425).abs() < 1e-5);
    }

    fn central_difference(p: &DetectorParams, batch: &Batch, labels: &[u8], idx: usize, step: f64) -> f64 {
        let eval = |delta: f64| {
            let mut q = p.clone();
            *q.iter_mut().nth(idx).unwrap() += delta;
            loss(&forward(&q, batch).unwrap(), labels)
        };
        (eval(step) - eval(-step)) / (2.0 * step)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut p = DetectorParams::init(2);
        p.tensors_mut()[1].iter_mut().for_each(|b| *b = 0.1);
        p.tensors_mut()[3].iter_mut().for_each(|b| *b = 0.05);
        let batch = random_batch(3, 10, 10, 8);
        let labels = [1, 0, 1];
        let (_, g) = backward(&p, &batch, &labels).unwrap();
        for (idx, &analytic) in g.iter().enumerate() {
            let numeric = central_difference(&p, &batch, &labels, idx, 1e-5);
            let tol = 1e-7f64.max(1e-4 * analytic.abs().max(numeric.abs()));
            assert!((analytic - numeric).abs() <= tol, "coord {idx}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn zero_input_kills_first_kernel_gradient() {
        let mut p = DetectorParams::init(6);
        p.tensors_mut()[1].iter_mut().for_each(|b| *b = 0.2);
        p.tensors_mut()[3].iter_mut().for_each(|b| *b = 0.1);
        let batch = Batch {
            n: 2,
            channels: 3,
            height: 8,
            width: 8,
            data: vec![0.0; 2 * 3 * 64],
        };
        let (_, g) = backward(&p, &batch, &[1, 0]).unwrap();
        assert!(g.tensors()[0].iter().all(|&v| v == 0.0));
        let mut q = p.clone();
        q.tensors_mut()[5][0] = 0.3;
        let (_, g) = backward(&q, &batch, &[1, 1]).unwrap();
        assert!(g.tensors()[5][0] != 0.0);
        assert!(g.tensors()[1].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let p = DetectorParams::init(3);
        let one = random_batch(2, 8, 8, 4);
        let mut two = one.clone();
        two.n = 4;
        two.data.extend_from_slice(&one.data);
        let (l1, g1) = backward(&p, &one, &[0, 1]).unwrap();
        let (l2, g2) = backward(&p, &two, &[0, 1, 0, 1]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_from_images_is_planar() {
        let img = ImageF::from_fn(8, 8, 3, |y, x, c| (c * 100 + y * 8 + x) as f64);
        let b = Batch::from_images(&[img.clone(), img]).unwrap();
        assert_eq!(b.n, 2);
        assert_eq!(b.sample(1)[64], 100.0);
        assert_eq!(b.sample(0)[9], 9.0);
    }
}
