use std::path::Path;

use rayon::prelude::*;

use super::metrics::EvalReport;
use super::model::{backward, forward, Batch};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::params::DetectorParams;
use crate::image::{self, CropSpec, Image8, ImageF};
use crate::reducers::Reducer;
use crate::rng;
use crate::synthgen::DatasetManifest;
use crate::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_BATCH_SIZE: usize = 2;
pub const DEFAULT_CROP: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub crop: usize,
    pub reducer: Reducer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            crop: DEFAULT_CROP,
            reducer: Reducer::None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
        }
        if self.crop < super::model::MIN_INPUT {
            return Err(Error::InvalidArgument(format!(
                "crop must be ≥ {}, got {}",
                super::model::MIN_INPUT,
                self.crop
            )));
        }
        self.reducer.check_crop(self.crop)
    }

    /// Apply `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    ///
    /// Keys: `lr`, `beta1`, `beta2`, `weight_decay`, `epochs`, `batch_size`,
    /// `crop`, `reducer`, `seed`.
    pub fn apply_key_values(mut self, text: &str) -> Result<Self> {
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("config line {line:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidArgument(format!("bad value {value:?} for config key {key}"));
        match key {
            "lr" => self.adam.lr = value.parse().map_err(|_| bad())?,
            "beta1" => self.adam.beta1 = value.parse().map_err(|_| bad())?,
            "beta2" => self.adam.beta2 = value.parse().map_err(|_| bad())?,
            "weight_decay" => self.adam.weight_decay = value.parse().map_err(|_| bad())?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad())?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad())?,
            "crop" => self.crop = value.parse().map_err(|_| bad())?,
            "reducer" => self.reducer = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "lr={}\nbeta1={}\nbeta2={}\nweight_decay={}\nepochs={}\nbatch_size={}\ncrop={}\nreducer={}\nseed={}\n",
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.weight_decay,
            self.epochs,
            self.batch_size,
            self.crop,
            self.reducer,
            self.seed
        )
    }
}

/// Training images with their labels (1 = fake).
#[derive(Clone, Copy)]
pub struct LabeledSet<'a> {
    pub images: &'a [Image8],
    pub labels: &'a [u8],
}

impl LabeledSet<'_> {
    fn check(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::Empty("no training images".into()));
        }
        if self.images.len() != self.labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} images but {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        if !self.labels.contains(&0) || !self.labels.contains(&1) {
            return Err(Error::InvalidArgument("training data must contain both labels".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: DetectorParams,
    /// Mean training loss of each epoch, measured before each batch's update.
    pub loss_trace: Vec<f64>,
}

/// Minibatch Adam training.
///
/// Each epoch shuffles the sample order, takes a fresh random crop of every
/// image and applies the reducer. All randomness derives from `cfg.seed`:
/// the initial weights from tag `init`, and per epoch `e` the order from
/// `(epoch, e)` and each sample's crop and reducer seeds from the epoch seed
/// with tags `crop` and `reduce` indexed by the sample's position in `set`.
pub fn train_on_images(set: LabeledSet<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    set.check()?;
    for img in set.images {
        if img.height() < cfg.crop || img.width() < cfg.crop {
            return Err(Error::CropTooLarge {
                size: cfg.crop,
                height: img.height(),
                width: img.width(),
            });
        }
    }

    let mut params = DetectorParams::init(rng::derive_seed(cfg.seed, "init", 0));
    let mut state = AdamState::default();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let n = set.images.len();

    for epoch in 0..cfg.epochs {
        let epoch_seed = rng::derive_seed(cfg.seed, "epoch", epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        rng::fisher_yates(&mut rng::seeded(epoch_seed), &mut order);

        let inputs: Vec<ImageF> = order
            .par_iter()
            .map(|&i| {
                let crop_seed = rng::derive_seed(epoch_seed, "crop", i as u64);
                let cropped = image::crop(&set.images[i], &CropSpec::random(cfg.crop, crop_seed))?;
                cfg.reducer.prepare(&cropped, rng::derive_seed(epoch_seed, "reduce", i as u64))
            })
            .collect::<Result<_>>()?;

        let mut epoch_loss = 0.0;
        for (chunk, idx) in inputs.chunks(cfg.batch_size).zip(order.chunks(cfg.batch_size)) {
            let batch = Batch::from_images(chunk)?;
            let labels: Vec<u8> = idx.iter().map(|&i| set.labels[i]).collect();
            let (loss, grads) = backward(&params, &batch, &labels)?;
            epoch_loss += loss * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut state, &cfg.adam);
        }
        loss_trace.push(epoch_loss / n as f64);
    }
    if !params.all_finite() {
        return Err(Error::InvalidArgument("training diverged to non-finite weights".into()));
    }
    Ok(TrainOutcome { params, loss_trace })
}

/// Train on every image listed in `dir/manifest.csv`.
pub fn train(dir: &Path, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let manifest = DatasetManifest::read(dir)?;
    let images = manifest.load_images(dir)?;
    let labels: Vec<u8> = manifest.entries.iter().map(|e| e.label).collect();
    train_on_images(
        LabeledSet {
            images: &images,
            labels: &labels,
        },
        cfg,
    )
}

/// An image to score, with the seed that drives its reducer.
#[derive(Clone, Copy)]
pub struct EvalItem<'a> {
    pub image: &'a Image8,
    pub label: u8,
    pub generator: &'a str,
    pub seed: u64,
}

/// Scores of every item: center crop, reducer seeded from the item's own
/// seed, forward pass. Items are independent, so the result does not depend
/// on their order.
pub fn score(params: &DetectorParams, items: &[EvalItem<'_>], reducer: Reducer, crop: usize) -> Result<Vec<f64>> {
    reducer.check_crop(crop)?;
    let inputs: Vec<ImageF> = items
        .par_iter()
        .map(|it| {
            let cropped = image::crop(it.image, &CropSpec::center(crop))?;
            reducer.prepare(&cropped, rng::derive_seed(it.seed, "reduce", 0))
        })
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(items.len());
    for chunk in inputs.chunks(256) {
        scores.extend(forward(params, &Batch::from_images(chunk)?)?);
    }
    Ok(scores)
}

pub fn evaluate_items(
    params: &DetectorParams,
    items: &[EvalItem<'_>],
    reducer: Reducer,
    crop: usize,
) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let scores = score(params, items, reducer, crop)?;
    let labels: Vec<u8> = items.iter().map(|it| it.label).collect();
    let gens: Vec<&str> = items.iter().map(|it| it.generator).collect();
    Ok(EvalReport::from_scores(&scores, &labels, &gens))
}

/// Evaluate on images already in memory, in manifest order.
pub fn evaluate_manifest(
    params: &DetectorParams,
    manifest: &DatasetManifest,
    images: &[Image8],
    reducer: Reducer,
    crop: usize,
) -> Result<EvalReport> {
    if images.len() != manifest.entries.len() {
        return Err(Error::Manifest(format!(
            "{} images for {} manifest entries",
            images.len(),
            manifest.entries.len()
        )));
    }
    let items: Vec<EvalItem<'_>> = manifest
        .entries
        .iter()
        .zip(images)
        .map(|(e, img)| EvalItem {
            image: img,
            label: e.label,
            generator: e.generator.tag(),
            seed: e.seed,
        })
        .collect();
    evaluate_items(params, &items, reducer, crop)
}

/// Evaluate on the split stored in `dir`.
pub fn evaluate(params: &DetectorParams, dir: &Path, reducer: Reducer, crop: usize) -> Result<EvalReport> {
    let manifest = DatasetManifest::read(dir)?;
    let images = manifest.load_images(dir)?;
    evaluate_manifest(params, &manifest, &images, reducer, crop)
}
