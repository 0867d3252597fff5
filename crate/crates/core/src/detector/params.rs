use std::fmt::Write as _;

use crate::reducers::Reducer;
use crate::rng;
use crate::{Error, Result};

pub const CONV1_OUT: usize = 8;
pub const CONV2_OUT: usize = 16;
pub const IN_CHANNELS: usize = 3;
pub const KERNEL: usize = 3;

const NAMES: [&str; 6] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "linear.weight",
    "linear.bias",
];

const SHAPES: [&[usize]; 6] = [
    &[CONV1_OUT, IN_CHANNELS, KERNEL, KERNEL],
    &[CONV1_OUT],
    &[CONV2_OUT, CONV1_OUT, KERNEL, KERNEL],
    &[CONV2_OUT],
    &[CONV2_OUT],
    &[1],
];

/// Every tensor of the classifier, in a fixed order. Gradients and Adam
/// moments reuse the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorParams {
    tensors: [Vec<f64>; 6],
}

impl DetectorParams {
    pub fn zeros() -> Self {
        Self {
            tensors: std::array::from_fn(|i| vec![0.0; SHAPES[i].iter().product()]),
        }
    }

    /// He-normal weights, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut p = Self::zeros();
        for (i, t) in p.tensors.iter_mut().enumerate() {
            if NAMES[i].ends_with(".bias") {
                continue;
            }
            // Conv kernels are [out, in, k, k]; the linear layer is [in].
            let fan_in: usize = match SHAPES[i] {
                [n] => *n,
                [_, rest @ ..] => rest.iter().product(),
                [] => 1,
            };
            let std = (2.0 / fan_in as f64).sqrt();
            t.iter_mut().for_each(|v| *v = std * rng::normal(&mut r));
        }
        p
    }

    pub fn names() -> &'static [&'static str; 6] {
        &NAMES
    }

    pub fn shapes() -> &'static [&'static [usize]; 6] {
        &SHAPES
    }

    pub fn tensors(&self) -> &[Vec<f64>; 6] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Vec<f64>; 6] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn conv1_w(&self) -> &[f64] {
        &self.tensors[0]
    }
    pub fn conv1_b(&self) -> &[f64] {
        &self.tensors[1]
    }
    pub fn conv2_w(&self) -> &[f64] {
        &self.tensors[2]
    }
    pub fn conv2_b(&self) -> &[f64] {
        &self.tensors[3]
    }
    pub fn fc_w(&self) -> &[f64] {
        &self.tensors[4]
    }
    pub fn fc_b(&self) -> f64 {
        self.tensors[5][0]
    }

    /// Flat view over every coordinate, tensor by tensor.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors.iter_mut().flatten()
    }

    pub fn add_assign(&mut self, other: &DetectorParams) {
        self.iter_mut().zip(other.iter()).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, k: f64) {
        self.iter_mut().for_each(|a| *a *= k);
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

pub const WEIGHTS_MAGIC: &str = "PIXMAP-W1";

/// A trained classifier together with the preprocessing it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub reducer: Reducer,
    pub crop: usize,
    pub params: DetectorParams,
}

impl SavedModel {
    /// Text format:
    ///
    /// ```text
    /// PIXMAP-W1
    /// reducer fixed
    /// crop 32
    /// tensor conv1.weight 8 3 3 3
    /// <space-separated values>
    /// ...
    /// ```
    ///
    /// Values use the shortest decimal that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{WEIGHTS_MAGIC}").unwrap();
        writeln!(out, "reducer {}", self.reducer).unwrap();
        writeln!(out, "crop {}", self.crop).unwrap();
        for ((name, shape), t) in NAMES.iter().zip(SHAPES).zip(&self.params.tensors) {
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
            let vals: Vec<String> = t.iter().map(f64::to_string).collect();
            writeln!(out, "{}", vals.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Weights(msg);
        let mut lines = text.lines();
        if lines.next() != Some(WEIGHTS_MAGIC) {
            return Err(bad(format!("missing {WEIGHTS_MAGIC} magic line")));
        }
        fn field<'a>(lines: &mut std::str::Lines<'a>, key: &str) -> Result<&'a str> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Weights(format!("missing {key} line")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::Weights(format!("expected {key} line, got {line:?}")))
        }
        let reducer: Reducer = field(&mut lines, "reducer")?.parse()?;
        let crop: usize = field(&mut lines, "crop")?
            .parse()
            .map_err(|_| bad("crop is not an integer".into()))?;
        let mut params = DetectorParams::zeros();
        for i in 0..NAMES.len() {
            let header = field(&mut lines, "tensor")?;
            let mut parts = header.split(' ');
            if parts.next() != Some(NAMES[i]) {
                return Err(bad(format!("expected tensor {}, got {header:?}", NAMES[i])));
            }
            let dims: Vec<usize> = parts
                .map(|d| d.parse().map_err(|_| bad(format!("bad shape in {header:?}"))))
                .collect::<Result<_>>()?;
            if dims != SHAPES[i] {
                return Err(bad(format!("tensor {} has shape {dims:?}, expected {:?}", NAMES[i], SHAPES[i])));
            }
            let values = lines.next().ok_or_else(|| bad(format!("missing values for {}", NAMES[i])))?;
            let values: Vec<f64> = values
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|v| v.parse().map_err(|_| bad(format!("bad value {v:?} in {}", NAMES[i]))))
                .collect::<Result<_>>()?;
            if values.len() != params.tensors[i].len() || values.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("tensor {} has wrong or non-finite values", NAMES[i])));
            }
            params.tensors[i] = values;
        }
        Ok(Self { reducer, crop, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_init() {
        let p = DetectorParams::init(1);
        assert_eq!(p.len(), 8 * 27 + 8 + 16 * 72 + 16 + 16 + 1);
        assert_eq!(p, DetectorParams::init(1));
        assert_ne!(p, DetectorParams::init(2));
        assert!(p.conv1_b().iter().all(|&b| b == 0.0));
        assert!(p.all_finite());
    }

    #[test]
    fn weights_text_round_trip_is_exact() {
        let mut p = DetectorParams::init(3);
        p.tensors_mut()[5][0] = 0.1 + 0.2;
        let model = SavedModel {
            reducer: Reducer::Shuffle { patch: 8 },
            crop: 32,
            params: p,
        };
        let text = model.to_text();
        assert!(text.starts_with("PIXMAP-W1\nreducer shuffle:8\ncrop 32\ntensor conv1.weight 8 3 3 3\n"));
        let back = SavedModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn weights_text_rejects_damage() {
        let text = SavedModel {
            reducer: Reducer::Fixed,
            crop: 16,
            params: DetectorParams::init(0),
        }
        .to_text();
        assert!(SavedModel::from_text(&text.replacen("PIXMAP-W1", "PIXMAP-W2", 1)).is_err());
        assert!(SavedModel::from_text(&text.replacen("8 3 3 3", "8 3 3 2", 1)).is_err());
        assert!(SavedModel::from_text(&text.replacen("reducer fixed", "reducer blur", 1)).is_err());
        let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(SavedModel::from_text(&truncated).is_err());
    }
}
