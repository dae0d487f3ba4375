//! Finite-difference gradient checks over every layer kind and
//! reduced-width versions of each model architecture.

use rand::Rng;

use crate::classifier::classifier_layers_with;
use crate::error::Result;
use crate::gan::{discriminator_layers_with, generator_layers_with};
use crate::nn::{grad_check, seeded_rng, ConvSpec, GradCheckReport, LayerSpec, Network, Tensor};

/// Relative error allowed between analytic and numeric gradients.
pub const TOLERANCE: f64 = 1e-4;

const BATCH: usize = 2;

/// `(name, layers, per-sample input shape)` for each checked network.
pub fn cases() -> Vec<(&'static str, Vec<LayerSpec>, Vec<usize>)> {
    let dense = LayerSpec::Dense { inputs: 5, outputs: 4 };
    vec![
        ("dense", vec![dense.clone()], vec![5]),
        (
            "conv2d",
            vec![LayerSpec::Conv2d(ConvSpec::k4s2(2, 3, 6, 4))],
            vec![2, 6, 4],
        ),
        (
            "deconv2d",
            vec![LayerSpec::Deconv2d(ConvSpec::k4s2(3, 2, 3, 2))],
            vec![3, 3, 2],
        ),
        ("relu", vec![dense.clone(), LayerSpec::Relu], vec![5]),
        ("leaky_relu", vec![dense.clone(), LayerSpec::leaky_relu()], vec![5]),
        ("sigmoid", vec![dense.clone(), LayerSpec::Sigmoid], vec![5]),
        (
            "flatten",
            vec![
                LayerSpec::Conv2d(ConvSpec::k4s2(1, 2, 4, 4)),
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 8, outputs: 3 },
            ],
            vec![1, 4, 4],
        ),
        (
            "autoencoder",
            vec![
                LayerSpec::Dense { inputs: 12, outputs: 4 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 4, outputs: 12 },
                LayerSpec::Relu,
            ],
            vec![12],
        ),
        ("generator", generator_layers_with(6, 3, 2, 4), vec![6]),
        ("discriminator", discriminator_layers_with(8, 8, 4), vec![1, 8, 8]),
        ("classifier", classifier_layers_with(8, 8, 2, 4, 5), vec![1, 8, 8]),
    ]
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub seed: u64,
    pub report: GradCheckReport,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.report.max_error() <= TOLERANCE
    }
}

/// Checks one network with random nonzero biases, a random input, and the
/// loss `sum(c * y)` for a random coefficient tensor `c`.
pub fn check_case(name: &'static str, layers: Vec<LayerSpec>, input_shape: &[usize], seed: u64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let mut net = Network::init(layers, input_shape, &mut rng)?;
    for (pname, t) in net.params.tensors_mut() {
        if pname.ends_with(".bias") {
            t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
    let mut shape = vec![BATCH];
    shape.extend_from_slice(input_shape);
    let n: usize = shape.iter().product();
    let input = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let out_shape = net.predict(&input)?.shape().to_vec();
    let m: usize = out_shape.iter().product();
    let coeff = Tensor::new(out_shape, (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let report = grad_check(&net, &input, |y| (y.dot(&coeff), coeff.clone()))?;
    Ok(CheckResult { name, seed, report })
}

/// Every case for each seed in `seeds`.
pub fn run_suite(seeds: impl IntoIterator<Item = u64> + Clone) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (name, layers, shape) in cases() {
        for seed in seeds.clone() {
            out.push(check_case(name, layers.clone(), &shape, seed)?);
        }
    }
    Ok(out)
}
