//! Pixel-level mapping preprocessing for synthetic-image detection.
//!
//! The crate is organised bottom-up:
//!
//! - [`image`]: 8-bit and real-valued rasters, cropping, quantization, PPM I/O.
//! - [`mapping`]: fixed and random 256-entry pixel mapping tables.
//! - [`reducers`]: competing semantic-reduction baselines (high-pass,
//!   patch shuffle, neighbouring-pixel residual) and the [`reducers::Reducer`]
//!   recipe used by the detector.
//! - [`spectral`]: 2-D DFT, centered power spectra, azimuthal profiles.
//! - [`synthgen`]: a synthetic real/fake corpus with upsampling artifacts
//!   and an optional semantic confound.
//! - [`detector`]: a two-layer convolutional classifier with manual
//!   backpropagation, Adam, and Acc/AP evaluation.
//! - [`experiment`]: the reducer comparison driver.

pub mod detector;
pub mod error;
pub mod experiment;
pub mod image;
pub mod mapping;
pub mod reducers;
pub mod rng;
pub mod spectral;
pub mod synthgen;

pub use error::{Error, Result};
pub use image::{CropMode, CropSpec, Image8, ImageF};
pub use mapping::{MappingMode, MappingTable};
pub use reducers::Reducer;
