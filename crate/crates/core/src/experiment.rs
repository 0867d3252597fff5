//! Train and evaluate one detector per reducer on a shared benchmark.

use std::fmt::Write as _;
use std::path::Path;

use crate::detector::{evaluate_manifest, train_on_images, LabeledSet, TrainConfig};
use crate::image::Image8;
use crate::reducers::Reducer;
use crate::synthgen::DatasetManifest;
use crate::Result;

pub const CSV_HEADER: &str = "reducer,train_acc,test_acc,test_ap";

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub reducer: Reducer,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_ap: f64,
    pub final_loss: f64,
}

/// A split held in memory.
pub struct Split<'a> {
    pub manifest: &'a DatasetManifest,
    pub images: &'a [Image8],
}

/// One row per reducer, in the given order. Every detector uses the same
/// config apart from the reducer, including the seed, so rows differ only
/// by preprocessing. Train accuracy is measured with center crops, like
/// test accuracy.
pub fn run_experiment(
    train: Split<'_>,
    test: Split<'_>,
    reducers: &[Reducer],
    base: &TrainConfig,
) -> Result<Vec<ComparisonRow>> {
    let labels: Vec<u8> = train.manifest.entries.iter().map(|e| e.label).collect();
    reducers
        .iter()
        .map(|&reducer| {
            let cfg = TrainConfig { reducer, ..*base };
            let out = train_on_images(
                LabeledSet {
                    images: train.images,
                    labels: &labels,
                },
                &cfg,
            )?;
            let tr = evaluate_manifest(&out.params, train.manifest, train.images, reducer, cfg.crop)?;
            let te = evaluate_manifest(&out.params, test.manifest, test.images, reducer, cfg.crop)?;
            Ok(ComparisonRow {
                reducer,
                train_accuracy: tr.accuracy,
                test_accuracy: te.accuracy,
                test_ap: te.average_precision,
                final_loss: out.loss_trace.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

/// Run the full comparison on `root/train` and `root/test`.
pub fn run_experiment_dir(root: &Path, base: &TrainConfig) -> Result<Vec<ComparisonRow>> {
    let load = |name: &str| -> Result<(DatasetManifest, Vec<Image8>)> {
        let dir = root.join(name);
        let m = DatasetManifest::read(&dir)?;
        let imgs = m.load_images(&dir)?;
        Ok((m, imgs))
    };
    let (train_m, train_i) = load("train")?;
    let (test_m, test_i) = load("test")?;
    run_experiment(
        Split {
            manifest: &train_m,
            images: &train_i,
        },
        Split {
            manifest: &test_m,
            images: &test_i,
        },
        &Reducer::COMPARISON,
        base,
    )
}

/// Fixed four-decimal CSV with [`CSV_HEADER`].
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4}",
            r.reducer, r.train_accuracy, r.test_accuracy, r.test_ap
        )
        .unwrap();
    }
    out
}
