//! Adversarial rebuild network.
//!
//! The generator maps a standardized 128-d autoencoder feature vector to a
//! 52x32 image; the discriminator scores how much an image looks like a
//! healthy volunteer's. The generator objective mixes the non-saturating
//! adversarial term with pixel MSE to the patient's own image:
//!
//! ```text
//! l_G = (1 - alpha) * mean(-ln D(G(x))) + alpha * mean(MSE(image, G(x)))
//! l_D = mean(-ln D(y)) + mean(-ln(1 - D(G(x))))
//! ```

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::autoencoder::AutoencoderModel;
use crate::error::{Error, Result};
use crate::nn::{
    bce_loss, clamp_probability, seeded_rng, AdamConfig, AdamState, BackwardOptions, Cache, ConvSpec, LayerSpec,
    Network, Tensor,
};
use crate::preprocess::{FeatureVector, PressureImage};
use crate::{FEATURE_DIM, IMAGE_COLS, IMAGE_LEN, IMAGE_ROWS};

/// Generator stack: dense projection to `channels x base_h x base_w`, then
/// two k4/s2 transposed convolutions, each doubling the spatial size.
pub fn generator_layers_with(features: usize, base_h: usize, base_w: usize, channels: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            inputs: features,
            outputs: channels * base_h * base_w,
        },
        LayerSpec::Relu,
        LayerSpec::Deconv2d(ConvSpec::k4s2(channels, channels / 2, base_h, base_w)),
        LayerSpec::Relu,
        LayerSpec::Deconv2d(ConvSpec::k4s2(channels / 2, 1, base_h * 2, base_w * 2)),
        LayerSpec::Sigmoid,
    ]
}

/// Discriminator stack for `height x width` inputs: two k4/s2 convolutions
/// (`channels / 2`, then `channels`) with LeakyReLU(0.2), then a dense logit.
pub fn discriminator_layers_with(height: usize, width: usize, channels: usize) -> Vec<LayerSpec> {
    let (h2, w2) = (height / 2, width / 2);
    vec![
        LayerSpec::Conv2d(ConvSpec::k4s2(1, channels / 2, height, width)),
        LayerSpec::leaky_relu(),
        LayerSpec::Conv2d(ConvSpec::k4s2(channels / 2, channels, h2, w2)),
        LayerSpec::leaky_relu(),
        LayerSpec::Flatten,
        LayerSpec::Dense {
            inputs: channels * (h2 / 2) * (w2 / 2),
            outputs: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

pub fn generator_layers() -> Vec<LayerSpec> {
    generator_layers_with(FEATURE_DIM, IMAGE_ROWS / 4, IMAGE_COLS / 4, 64)
}

pub fn discriminator_layers() -> Vec<LayerSpec> {
    discriminator_layers_with(IMAGE_ROWS, IMAGE_COLS, 64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorModel {
    net: Network,
}

impl GeneratorModel {
    pub fn untrained(seed: u64) -> Self {
        let net =
            Network::init(generator_layers(), &[FEATURE_DIM], &mut seeded_rng(seed)).expect("static architecture");
        GeneratorModel { net }
    }

    pub fn from_network(net: Network) -> Result<Self> {
        if net.layers() != generator_layers().as_slice() {
            return Err(Error::InvalidInput("network is not the generator architecture".into()));
        }
        Ok(GeneratorModel { net })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Images for a batch of standardized features, shape `[N, 1, 52, 32]`.
    pub fn generate(&self, features: &[FeatureVector]) -> Result<Tensor> {
        self.net.predict(&feature_batch(features)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorModel {
    net: Network,
}

impl DiscriminatorModel {
    pub fn untrained(seed: u64) -> Self {
        let net = Network::init(
            discriminator_layers(),
            &[1, IMAGE_ROWS, IMAGE_COLS],
            &mut seeded_rng(seed),
        )
        .expect("static architecture");
        DiscriminatorModel { net }
    }

    pub fn from_network(net: Network) -> Result<Self> {
        if net.layers() != discriminator_layers().as_slice() {
            return Err(Error::InvalidInput(
                "network is not the discriminator architecture".into(),
            ));
        }
        Ok(DiscriminatorModel { net })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Realness probabilities for a batch of images.
    pub fn score(&self, images: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.predict(images)?.into_data())
    }
}

/// Stacks feature vectors as `[N, 128]`.
pub fn feature_batch(features: &[FeatureVector]) -> Result<Tensor> {
    let rows: Vec<&[f64]> = features.iter().map(|f| f.values()).collect();
    Tensor::stack(&rows, &[FEATURE_DIM])
}

/// Stacks images as `[N, 1, 52, 32]`.
pub fn image_batch(images: &[&PressureImage]) -> Result<Tensor> {
    let rows: Vec<&[f64]> = images.iter().map(|i| i.grid()).collect();
    Tensor::stack(&rows, &[1, IMAGE_ROWS, IMAGE_COLS])
}

/// Rebuilds one patient image: `G(standardize(encode(img)))`.
pub fn rebuild(img: &PressureImage, ae: &AutoencoderModel, g: &GeneratorModel) -> Result<PressureImage> {
    Ok(rebuild_batch(&[img], ae, g)?.remove(0))
}

/// Rebuilds a batch, carrying extrema and metadata over from each input.
pub fn rebuild_batch(
    images: &[&PressureImage],
    ae: &AutoencoderModel,
    g: &GeneratorModel,
) -> Result<Vec<PressureImage>> {
    let features = ae.features(images)?;
    let out = g.generate(&features)?;
    images
        .iter()
        .enumerate()
        .map(|(i, img)| img.with_grid(out.sample(i).to_vec()))
        .collect()
}

/// Loss value and its gradients for one generator sample.
#[derive(Clone, Debug)]
pub struct GeneratorLoss {
    pub value: f64,
    /// d l_G / d d_fake
    pub d_fake_grad: f64,
    /// d l_G / d rebuilt
    pub rebuilt_grad: Vec<f64>,
}

/// `(1 - alpha) * (-ln d_fake) + alpha * MSE(original, rebuilt)` for one sample.
pub fn generator_loss(d_fake: f64, original: &[f64], rebuilt: &[f64], alpha: f64) -> Result<GeneratorLoss> {
    if original.len() != rebuilt.len() || original.is_empty() {
        return Err(Error::Shape(format!(
            "original ({}) and rebuilt ({}) differ in size",
            original.len(),
            rebuilt.len()
        )));
    }
    let (adv, adv_grad) = bce_loss(d_fake, 1.0);
    let n = original.len() as f64;
    let mse = original
        .iter()
        .zip(rebuilt)
        .map(|(o, r)| (r - o) * (r - o))
        .sum::<f64>()
        / n;
    Ok(GeneratorLoss {
        value: (1.0 - alpha) * adv + alpha * mse,
        d_fake_grad: (1.0 - alpha) * adv_grad,
        rebuilt_grad: original
            .iter()
            .zip(rebuilt)
            .map(|(o, r)| alpha * 2.0 * (r - o) / n)
            .collect(),
    })
}

/// `-ln d_real - ln(1 - d_fake)`, with the gradients for both inputs.
pub fn discriminator_loss(d_real: f64, d_fake: f64) -> (f64, f64, f64) {
    let (real, real_grad) = bce_loss(d_real, 1.0);
    let (fake, fake_grad) = bce_loss(d_fake, 0.0);
    (real + fake, real_grad, fake_grad)
}

/// Fraction of correct real/fake calls at threshold 0.5.
pub fn discriminator_accuracy(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    let correct = real_scores.iter().filter(|&&s| s >= 0.5).count() + fake_scores.iter().filter(|&&s| s < 0.5).count();
    correct as f64 / (real_scores.len() + fake_scores.len()) as f64
}

/// One discriminator evaluation on `real` and `fake` batches.
#[derive(Clone, Debug)]
pub struct DiscriminatorStep {
    pub loss: f64,
    pub accuracy: f64,
    pub grads: Vec<Tensor>,
}

/// Batch discriminator loss (mean over each half) and its parameter gradients.
pub fn discriminator_gradients(d: &Network, real: &Tensor, fake: &Tensor) -> Result<DiscriminatorStep> {
    let (nr, nf) = (real.batch(), fake.batch());
    let mut data = Vec::with_capacity(real.len() + fake.len());
    data.extend_from_slice(real.data());
    data.extend_from_slice(fake.data());
    let mut shape = real.shape().to_vec();
    shape[0] = nr + nf;
    let both = Tensor::new(shape, data)?;
    let cache = d.forward(&both)?;
    let scores = cache.output().data();
    let mut loss = 0.0;
    let mut upstream = Vec::with_capacity(nr + nf);
    for (i, &s) in scores.iter().enumerate() {
        let (target, n) = if i < nr { (1.0, nr) } else { (0.0, nf) };
        let (l, g) = bce_loss(s, target);
        loss += l / n as f64;
        upstream.push(g / n as f64);
    }
    let accuracy = discriminator_accuracy(&scores[..nr], &scores[nr..]);
    let upstream = Tensor::new(vec![nr + nf, 1], upstream)?;
    let grads = d.backward(&cache, &upstream, BackwardOptions::params_only())?;
    Ok(DiscriminatorStep {
        loss,
        accuracy,
        grads: grads.params,
    })
}

/// Mean generator loss over a batch and the generator parameter gradients,
/// given a cached generator forward pass.
fn generator_step(
    g: &Network,
    g_cache: &Cache,
    d: &Network,
    originals: &Tensor,
    alpha: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let fake = g_cache.output();
    let n = fake.batch();
    let d_cache = d.forward(fake)?;
    let scores = d_cache.output().data();
    let mut loss = 0.0;
    let mut d_upstream = Vec::with_capacity(n);
    let mut pixel_grad = Vec::with_capacity(fake.len());
    for (i, &score) in scores.iter().enumerate().take(n) {
        let l = generator_loss(score, originals.sample(i), fake.sample(i), alpha)?;
        loss += l.value / n as f64;
        d_upstream.push(l.d_fake_grad / n as f64);
        pixel_grad.extend(l.rebuilt_grad.iter().map(|v| v / n as f64));
    }
    let through_d = d.backward(
        &d_cache,
        &Tensor::new(vec![n, 1], d_upstream)?,
        BackwardOptions::input_only(),
    )?;
    let adv_grad = through_d.input.expect("input gradient requested");
    let upstream: Vec<f64> = pixel_grad.iter().zip(adv_grad.data()).map(|(p, a)| p + a).collect();
    let grads = g.backward(
        g_cache,
        &Tensor::new(fake.shape().to_vec(), upstream)?,
        BackwardOptions::params_only(),
    )?;
    Ok((loss, grads.params))
}

/// Mean generator loss and parameter gradients for a batch of features.
pub fn generator_gradients(
    g: &Network,
    d: &Network,
    features: &Tensor,
    originals: &Tensor,
    alpha: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let cache = g.forward(features)?;
    generator_step(g, &cache, d, originals, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanConfig {
    /// Weight of the MSE term.
    pub alpha: f64,
    pub iterations: usize,
    /// Discriminator steps per iteration.
    pub k_d: usize,
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            alpha: 0.03,
            iterations: 20_000,
            k_d: 1,
            batch: 32,
            seed: 42,
            adam: AdamConfig::default(),
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.iterations == 0 || self.k_d == 0 || self.batch == 0 {
            return Err(Error::Config("iterations, k_d and batch must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub g_loss: f64,
    pub d_loss: f64,
    /// Discriminator accuracy on the iteration's training batch.
    pub d_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GanTraining {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub trace: Vec<TraceRow>,
}

/// Cycles through a shuffled index list, reshuffling on each pass.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
}

impl Sampler {
    fn new(n: usize) -> Self {
        Sampler {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

pub fn train_n2rpp(
    patients: &[PressureImage],
    healthy: &[PressureImage],
    ae: &AutoencoderModel,
    cfg: &GanConfig,
) -> Result<GanTraining> {
    train_n2rpp_with(patients, healthy, ae, cfg, |_, _, _| {})
}

/// Alternating training. Each iteration runs `k_d` discriminator steps on
/// healthy (label 1) and rebuilt patient (label 0) batches, then one
/// generator step against the updated, frozen discriminator. The
/// autoencoder is only read. `on_iteration` sees each trace row with the
/// current generator and discriminator.
pub fn train_n2rpp_with(
    patients: &[PressureImage],
    healthy: &[PressureImage],
    ae: &AutoencoderModel,
    cfg: &GanConfig,
    mut on_iteration: impl FnMut(&TraceRow, &Network, &Network),
) -> Result<GanTraining> {
    cfg.validate()?;
    if patients.is_empty() {
        return Err(Error::EmptyDataset("patient images"));
    }
    if healthy.is_empty() {
        return Err(Error::EmptyDataset("healthy images"));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut g = GeneratorModel::untrained(cfg.seed.wrapping_add(1)).net;
    let mut d = DiscriminatorModel::untrained(cfg.seed.wrapping_add(2)).net;
    let mut g_adam = AdamState::new(&g.params, cfg.adam);
    let mut d_adam = AdamState::new(&d.params, cfg.adam);

    let patient_refs: Vec<&PressureImage> = patients.iter().collect();
    let features = ae.features(&patient_refs)?;
    let mut patient_sampler = Sampler::new(patients.len());
    let mut healthy_sampler = Sampler::new(healthy.len());

    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let mut d_step = None;
        let mut last = None;
        for _ in 0..cfg.k_d {
            let p_idx = patient_sampler.next_batch(cfg.batch, &mut rng);
            let h_idx = healthy_sampler.next_batch(cfg.batch, &mut rng);
            let z: Vec<FeatureVector> = p_idx.iter().map(|&i| features[i].clone()).collect();
            let g_cache = g.forward(&feature_batch(&z)?)?;
            let real = image_batch(&h_idx.iter().map(|&i| &healthy[i]).collect::<Vec<_>>())?;
            let step = discriminator_gradients(&d, &real, g_cache.output())?;
            if !step.loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration });
            }
            d_adam.update(&mut d.params, &step.grads)?;
            d_step = Some(step);
            last = Some((p_idx, g_cache));
        }
        let d_step = d_step.expect("k_d >= 1");
        let (p_idx, g_cache) = last.expect("k_d >= 1");
        let originals = image_batch(&p_idx.iter().map(|&i| &patients[i]).collect::<Vec<_>>())?;
        let (g_loss, g_grads) = generator_step(&g, &g_cache, &d, &originals, cfg.alpha)?;
        if !g_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        g_adam.update(&mut g.params, &g_grads)?;
        let row = TraceRow {
            iteration,
            g_loss,
            d_loss: d_step.loss,
            d_accuracy: d_step.accuracy,
        };
        on_iteration(&row, &g, &d);
        trace.push(row);
    }
    Ok(GanTraining {
        generator: GeneratorModel { net: g },
        discriminator: DiscriminatorModel { net: d },
        trace,
    })
}

/// Monte-Carlo estimate of the combined objective over the given samples:
/// `(1 - alpha) * [mean ln D(y) + mean ln(1 - D(G(x)))] + alpha * mean MSE(x, G(x))`.
pub fn objective_value(
    g: &GeneratorModel,
    d: &DiscriminatorModel,
    ae: &AutoencoderModel,
    patients: &[PressureImage],
    healthy: &[PressureImage],
    alpha: f64,
) -> Result<f64> {
    if patients.is_empty() || healthy.is_empty() {
        return Err(Error::EmptyDataset("objective samples"));
    }
    let refs: Vec<&PressureImage> = patients.iter().collect();
    let rebuilt = rebuild_batch(&refs, ae, g)?;
    let fake = image_batch(&rebuilt.iter().collect::<Vec<_>>())?;
    let real = image_batch(&healthy.iter().collect::<Vec<_>>())?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let real_term = mean(
        &d.score(&real)?
            .iter()
            .map(|&p| clamp_probability(p).ln())
            .collect::<Vec<_>>(),
    );
    let fake_term = mean(
        &d.score(&fake)?
            .iter()
            .map(|&p| (1.0 - clamp_probability(p)).ln())
            .collect::<Vec<_>>(),
    );
    let mse = mean(
        &patients
            .iter()
            .zip(&rebuilt)
            .map(|(o, r)| o.grid().iter().zip(r.grid()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / IMAGE_LEN as f64)
            .collect::<Vec<_>>(),
    );
    Ok((1.0 - alpha) * (real_term + fake_term) + alpha * mse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_loss_examples() {
        let o = vec![0.2, 0.4];
        let r = vec![0.3, 0.1];
        let mse = (0.01 + 0.09) / 2.0;
        let l = generator_loss(0.37, &o, &r, 1.0).unwrap();
        assert!((l.value - mse).abs() < 1e-15);
        let l = generator_loss(0.5, &o, &r, 0.0).unwrap();
        assert!((l.value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(l.rebuilt_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn generator_loss_mixes_terms() {
        // Original/rebuilt chosen so that the MSE term is 0.02.
        let o = vec![0.0; 4];
        let r = vec![0.2, 0.0, 0.2, 0.0];
        let l = generator_loss(0.5, &o, &r, 0.03).unwrap();
        assert!((l.value - 0.672953).abs() < 1e-6, "{}", l.value);
    }

    #[test]
    fn non_saturating_gradient_is_strong_when_d_rejects() {
        let l = generator_loss(0.01, &[0.0], &[0.0], 0.0).unwrap();
        let saturating = 1.0 / (1.0 - 0.01);
        assert!(l.d_fake_grad.abs() / saturating > 50.0);
        assert!(l.d_fake_grad < 0.0);
    }

    #[test]
    fn discriminator_loss_examples() {
        assert!(discriminator_loss(1.0, 0.0).0 < 1e-6);
        assert!((discriminator_loss(0.5, 0.5).0 - 1.386294).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for a in [0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
            let v = discriminator_loss(a, 1.0 - a).0;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn config_validation() {
        assert!(GanConfig {
            alpha: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GanConfig {
            k_d: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GanConfig {
            iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GanConfig::default().validate().is_ok());
    }

    #[test]
    fn default_architectures_have_the_right_shapes() {
        let g = GeneratorModel::untrained(0);
        let z = vec![FeatureVector::new(vec![0.5; FEATURE_DIM]).unwrap(); 2];
        let out = g.generate(&z).unwrap();
        assert_eq!(out.shape(), &[2, 1, IMAGE_ROWS, IMAGE_COLS]);
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let d = DiscriminatorModel::untrained(0);
        let s = d.score(&out).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
