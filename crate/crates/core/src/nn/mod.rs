//! Small dense neural-network engine: layers, losses, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod gemm;
mod gradcheck;
mod layer;
mod loss;
mod network;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, FD_STEP};
pub use layer::{ConvSpec, LayerSpec};
pub use loss::{bce_loss, clamp_probability, mse_loss, PROB_CLAMP};
pub use network::{BackwardOptions, Cache, Gradients, Network, NetworkParams};
pub use tensor::Tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one RNG used for every seeded operation.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
