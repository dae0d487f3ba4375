use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean squared error and its gradient with respect to `a`.
pub fn mse_loss(a: &Tensor, b: &Tensor) -> Result<(f64, Tensor)> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "mse operands {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.len() as f64;
    let mut sum = 0.0;
    let grad = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x - y;
            sum += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((sum / n, Tensor::from_parts(a.shape().to_vec(), grad)))
}

/// Binary cross-entropy of one probability against a 0/1 label.
///
/// Returns the loss and `d loss / d p`. The derivative is evaluated at the
/// clamped probability so saturated outputs still pass a signal through.
pub fn bce_loss(p: f64, label: f64) -> (f64, f64) {
    debug_assert!(label == 0.0 || label == 1.0);
    let p = clamp_probability(p);
    let loss = -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
    let grad = -label / p + (1.0 - label) / (1.0 - p);
    (loss, grad)
}
