//! Symmetric one-hidden-layer autoencoder, 1664 -> 128 -> 1664, ReLU on
//! both dense layers. The bottleneck activations are the features.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{mse_loss, seeded_rng, AdamConfig, AdamState, BackwardOptions, LayerSpec, Network, Tensor};
use crate::preprocess::{standardize_features, FeatureVector, Grid, PressureImage};
use crate::{FEATURE_DIM, IMAGE_COLS, IMAGE_LEN, IMAGE_ROWS};

/// Layers `0..ENCODER_DEPTH` form the encoder.
const ENCODER_DEPTH: usize = 2;

/// Initial decoder output bias, the middle of the [0, 1] target range.
/// With a zero bias, output pixels whose pre-activation starts negative
/// never receive gradient through the final ReLU and stay at 0.
pub const DECODER_BIAS_INIT: f64 = 0.5;

pub fn layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: IMAGE_LEN,
            outputs: FEATURE_DIM,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: FEATURE_DIM,
            outputs: IMAGE_LEN,
        },
        LayerSpec::Relu,
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    net: Network,
    trained: bool,
}

impl AutoencoderModel {
    /// Freshly initialized weights; encode/decode refuse to run on it.
    pub fn untrained(seed: u64) -> Self {
        let mut net = Network::init(layers(), &[IMAGE_LEN], &mut seeded_rng(seed)).expect("static architecture");
        for (name, t) in net.params.tensors_mut() {
            if name == "2.bias" {
                t.data_mut().fill(DECODER_BIAS_INIT);
            }
        }
        AutoencoderModel { net, trained: false }
    }

    /// Wraps trained parameters (for example, loaded from a model file).
    pub fn from_network(net: Network) -> Result<Self> {
        if net.layers() != layers().as_slice() || net.input_shape() != [IMAGE_LEN] {
            return Err(Error::InvalidInput(
                "network is not the 1664-128-1664 autoencoder".into(),
            ));
        }
        Ok(AutoencoderModel { net, trained: true })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    fn check_trained(&self) -> Result<()> {
        if self.trained {
            Ok(())
        } else {
            Err(Error::Untrained)
        }
    }

    fn batch(images: &[&PressureImage]) -> Result<Tensor> {
        let rows: Vec<&[f64]> = images.iter().map(|i| i.grid()).collect();
        Tensor::stack(&rows, &[IMAGE_LEN])
    }

    /// Bottleneck activations (nonnegative, not standardized).
    pub fn encode(&self, img: &PressureImage) -> Result<FeatureVector> {
        Ok(self.encode_batch(&[img])?.remove(0))
    }

    pub fn encode_batch(&self, images: &[&PressureImage]) -> Result<Vec<FeatureVector>> {
        self.check_trained()?;
        let h = self.net.run_layers(&Self::batch(images)?, 0, ENCODER_DEPTH)?;
        (0..h.batch())
            .map(|i| FeatureVector::new(h.sample(i).to_vec()))
            .collect()
    }

    /// Encoded and standardized, ready for the generator.
    pub fn features(&self, images: &[&PressureImage]) -> Result<Vec<FeatureVector>> {
        self.encode_batch(images)?
            .iter()
            .enumerate()
            .map(|(i, f)| {
                standardize_features(f)
                    .map_err(|e| Error::InvalidInput(format!("features of `{}`: {e}", images[i].meta.case_id)))
            })
            .collect()
    }

    pub fn decode(&self, v: &FeatureVector) -> Result<Grid> {
        self.check_trained()?;
        let x = Tensor::new(vec![1, FEATURE_DIM], v.values().to_vec())?;
        let y = self.net.run_layers(&x, ENCODER_DEPTH, self.net.layers().len())?;
        Grid::new(IMAGE_ROWS, IMAGE_COLS, y.into_data())
    }

    pub fn reconstruct(&self, img: &PressureImage) -> Result<Grid> {
        self.check_trained()?;
        let y = self.net.predict(&Self::batch(&[img])?)?;
        Grid::new(IMAGE_ROWS, IMAGE_COLS, y.into_data())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            epochs: 500,
            batch: 32,
            lr: 1e-3,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AeTraining {
    pub model: AutoencoderModel,
    /// Mean reconstruction MSE of each epoch.
    pub loss_history: Vec<f64>,
}

/// Minibatch Adam on pixel MSE.
pub fn train_autoencoder(images: &[PressureImage], cfg: &AeConfig) -> Result<AeTraining> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("autoencoder training set"));
    }
    if cfg.batch == 0 || cfg.epochs == 0 {
        return Err(Error::Config("autoencoder epochs and batch must be positive".into()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut model = AutoencoderModel::untrained(cfg.seed);
    let mut adam = AdamState::new(
        &model.net.params,
        AdamConfig {
            lr: cfg.lr,
            beta1: 0.9,
            ..Default::default()
        },
    );
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&PressureImage> = chunk.iter().map(|&i| &images[i]).collect();
            let x = AutoencoderModel::batch(&batch)?;
            let cache = model.net.forward(&x)?;
            let (loss, grad) = mse_loss(cache.output(), &x)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: epoch });
            }
            total += loss * chunk.len() as f64;
            let grads = model.net.backward(&cache, &grad, BackwardOptions::params_only())?;
            adam.update(&mut model.net.params, &grads.params)?;
        }
        loss_history.push(total / images.len() as f64);
    }
    model.trained = true;
    Ok(AeTraining { model, loss_history })
}
