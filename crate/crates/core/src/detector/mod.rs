//! Small convolutional real/fake classifier trained from scratch.

pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;

pub use metrics::{accuracy, average_precision, EvalReport, GeneratorStats};
pub use model::{backward, forward, loss, Batch};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{DetectorParams, SavedModel};
pub use train::{evaluate, evaluate_items, evaluate_manifest, train, train_on_images, EvalItem, LabeledSet, TrainConfig, TrainOutcome};
