//! Rebuilding plantar-pressure images with an adversarial network driven
//! by autoencoder features.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: the dense/convolutional engine with Adam and gradient checking.
//! - [`preprocess`]: frame aggregation, cropping, resampling, normalization.
//! - [`synth`]: a seeded synthetic cohort generator.
//! - [`autoencoder`]: the 1664-128-1664 feature extractor.
//! - [`gan`]: generator, discriminator, losses, and the training loop.
//! - [`classifier`]: the healthy-vs-ACLD evaluation network, splits, AUC.
//! - [`saliency`]: difference heatmaps, guided backpropagation, region stats.
//! - [`formats`] and [`cli`]: on-disk formats and the command implementations.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod autoencoder;
pub mod checks;
pub mod classifier;
pub mod cli;
pub mod error;
pub mod formats;
pub mod gan;
pub mod nn;
pub mod preprocess;
pub mod saliency;
pub mod synth;

pub use error::{Error, Result};

/// Image height after normalization.
pub const IMAGE_ROWS: usize = 52;
/// Image width after normalization.
pub const IMAGE_COLS: usize = 32;
/// Flattened image length.
pub const IMAGE_LEN: usize = IMAGE_ROWS * IMAGE_COLS;
/// Autoencoder bottleneck width.
pub const FEATURE_DIM: usize = 128;
