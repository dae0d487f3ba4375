mod common;

use n2rpp::autoencoder::{train_autoencoder, AeConfig, AutoencoderModel};
use n2rpp::classifier::compute_auc;
use n2rpp::formats::{encode_model, NetName};
use n2rpp::gan::{
    discriminator_gradients, discriminator_layers, feature_batch, generator_gradients, generator_layers,
    generator_loss, image_batch, objective_value, train_n2rpp, DiscriminatorModel, GanConfig, GeneratorModel,
};
use n2rpp::nn::{mse_loss, seeded_rng, AdamConfig, AdamState, BackwardOptions, Network, NetworkParams, Tensor};
use n2rpp::preprocess::{FeatureVector, Label, PressureImage};
use n2rpp::{FEATURE_DIM, IMAGE_COLS, IMAGE_ROWS};
use proptest::prelude::*;
use rand::Rng;

fn random_features(n: usize, rng: &mut impl Rng) -> Vec<FeatureVector> {
    (0..n)
        .map(|_| FeatureVector::new((0..FEATURE_DIM).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
        .collect()
}

fn random_images(n: usize, rng: &mut impl Rng) -> Tensor {
    let len = n * IMAGE_ROWS * IMAGE_COLS;
    Tensor::new(
        vec![n, 1, IMAGE_ROWS, IMAGE_COLS],
        (0..len).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn alpha_one_is_pure_mse_regression() {
    for seed in 0..3 {
        let mut rng = seeded_rng(seed);
        let g = Network::init(generator_layers(), &[FEATURE_DIM], &mut rng).unwrap();
        let d = Network::init(discriminator_layers(), &[1, IMAGE_ROWS, IMAGE_COLS], &mut rng).unwrap();
        let z = feature_batch(&random_features(4, &mut rng)).unwrap();
        let originals = random_images(4, &mut rng);
        let (loss, grads) = generator_gradients(&g, &d, &z, &originals, 1.0).unwrap();

        let cache = g.forward(&z).unwrap();
        let (mse, upstream) = mse_loss(cache.output(), &originals).unwrap();
        let reference = g.backward(&cache, &upstream, BackwardOptions::params_only()).unwrap();
        assert!((loss - mse).abs() <= 1e-12);
        for (a, b) in grads.iter().zip(&reference.params) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn alpha_zero_ignores_the_image_term() {
    let mut rng = seeded_rng(1);
    for _ in 0..50 {
        let d_fake = rng.random_range(0.01..0.99);
        let a: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let l = generator_loss(d_fake, &a, &b, 0.0).unwrap();
        assert_eq!(l.value, -d_fake.ln());
        assert!(l.rebuilt_grad.iter().all(|&g| g == 0.0));
        assert_eq!(l.value, generator_loss(d_fake, &a, &a, 0.0).unwrap().value);
    }
}

#[test]
fn discriminator_step_does_not_increase_its_loss() {
    for seed in 0..20 {
        let mut rng = seeded_rng(seed);
        let mut d = Network::init(discriminator_layers(), &[1, IMAGE_ROWS, IMAGE_COLS], &mut rng).unwrap();
        let real = random_images(6, &mut rng);
        let fake = random_images(6, &mut rng);
        let before = discriminator_gradients(&d, &real, &fake).unwrap();
        let mut adam = AdamState::new(&d.params, AdamConfig::default());
        adam.update(&mut d.params, &before.grads).unwrap();
        let after = discriminator_gradients(&d, &real, &fake).unwrap();
        assert!(
            after.loss <= before.loss + 1e-6,
            "seed {seed}: {} -> {}",
            before.loss,
            after.loss
        );
    }
}

fn trained_ae(images: &[PressureImage]) -> AutoencoderModel {
    train_autoencoder(
        images,
        &AeConfig {
            epochs: 5,
            ..AeConfig::default()
        },
    )
    .unwrap()
    .model
}

fn split(images: Vec<PressureImage>) -> (Vec<PressureImage>, Vec<PressureImage>) {
    images.into_iter().partition(|i| i.meta.label == Label::Acld)
}

#[test]
fn gan_training_leaves_the_autoencoder_alone_and_is_deterministic() {
    let images = common::images(12, 12, 3);
    let ae = trained_ae(&images);
    let before = encode_model(NetName::Ae, &ae.network().params);
    let (patients, healthy) = split(images);
    let cfg = GanConfig {
        iterations: 4,
        batch: 8,
        ..GanConfig::default()
    };
    let a = train_n2rpp(&patients, &healthy, &ae, &cfg).unwrap();
    assert_eq!(encode_model(NetName::Ae, &ae.network().params), before);
    let b = train_n2rpp(&patients, &healthy, &ae, &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(
        encode_model(NetName::Gen, &a.generator.network().params),
        encode_model(NetName::Gen, &b.generator.network().params)
    );
    let c = train_n2rpp(&patients, &healthy, &ae, &GanConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn gan_rejects_empty_inputs() {
    let images = common::images(4, 4, 0);
    let ae = trained_ae(&images);
    let (patients, healthy) = split(images);
    let cfg = GanConfig {
        iterations: 1,
        ..GanConfig::default()
    };
    assert!(train_n2rpp(&[], &healthy, &ae, &cfg).is_err());
    assert!(train_n2rpp(&patients, &[], &ae, &cfg).is_err());
}

fn constant_half_discriminator() -> DiscriminatorModel {
    let mut rng = seeded_rng(0);
    let mut net = Network::init(discriminator_layers(), &[1, IMAGE_ROWS, IMAGE_COLS], &mut rng).unwrap();
    let entries: Vec<(String, Tensor)> = net
        .params
        .iter()
        .map(|(n, t)| (n.to_string(), Tensor::zeros(t.shape())))
        .collect();
    net = Network::with_params(
        discriminator_layers(),
        &[1, IMAGE_ROWS, IMAGE_COLS],
        NetworkParams::new(entries).unwrap(),
    )
    .unwrap();
    DiscriminatorModel::from_network(net).unwrap()
}

#[test]
fn objective_examples() {
    let images = common::images(6, 6, 5);
    let ae = trained_ae(&images);
    let (patients, healthy) = split(images);
    let g = GeneratorModel::from_network(GeneratorModel::untrained(2).network().clone()).unwrap();
    let d = constant_half_discriminator();
    let v = objective_value(&g, &d, &ae, &patients, &healthy, 0.0).unwrap();
    assert!((v - (-1.386294)).abs() < 1e-6, "{v}");

    let full = objective_value(&g, &d, &ae, &patients, &healthy, 1.0).unwrap();
    let rebuilt = n2rpp::gan::rebuild_batch(&patients.iter().collect::<Vec<_>>(), &ae, &g).unwrap();
    let (mse, _) = mse_loss(
        &image_batch(&rebuilt.iter().collect::<Vec<_>>()).unwrap(),
        &image_batch(&patients.iter().collect::<Vec<_>>()).unwrap(),
    )
    .unwrap();
    assert!((full - mse).abs() < 1e-12);
}

#[test]
fn rebuild_carries_metadata_and_stays_in_range() {
    let images = common::images(3, 3, 8);
    let ae = trained_ae(&images);
    let g = GeneratorModel::from_network(GeneratorModel::untrained(4).network().clone()).unwrap();
    for img in &images {
        let r = n2rpp::gan::rebuild(img, &ae, &g).unwrap();
        assert_eq!((r.p_min, r.p_max, &r.meta), (img.p_min, img.p_max, &img.meta));
        assert!(r.grid().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(r, n2rpp::gan::rebuild(img, &ae, &g).unwrap());
    }
}

#[test]
fn autoencoder_overfits_a_single_image() {
    let images = common::images(1, 1, 11)[..1].to_vec();
    let trained = train_autoencoder(
        &images,
        &AeConfig {
            epochs: 2000,
            ..AeConfig::default()
        },
    )
    .unwrap();
    let mse = *trained.loss_history.last().unwrap();
    assert!(mse < 1e-3, "{mse}");
    let recon = trained.model.reconstruct(&images[0]).unwrap();
    let direct = images[0]
        .grid()
        .iter()
        .zip(&recon.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / recon.data.len() as f64;
    assert!(direct < 1e-3);
    assert!(trained.loss_history[0] > mse);
}

#[test]
fn autoencoder_training_is_bitwise_deterministic() {
    let images = common::images(4, 4, 12);
    let cfg = AeConfig {
        epochs: 3,
        ..AeConfig::default()
    };
    let a = train_autoencoder(&images, &cfg).unwrap();
    let b = train_autoencoder(&images, &cfg).unwrap();
    assert_eq!(a.loss_history, b.loss_history);
    assert_eq!(a.model, b.model);
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        scores in prop::collection::vec(0u8..20, 2..60),
        labels in prop::collection::vec(any::<bool>(), 60),
    ) {
        // Coarse scores so ties are common.
        let scores: Vec<f64> = scores.iter().map(|&s| s as f64 / 19.0).collect();
        let positive = &labels[..scores.len()];
        prop_assume!(positive.iter().any(|&p| p) && positive.iter().any(|&p| !p));
        let auc = compute_auc(&scores, positive).unwrap();
        prop_assert!((auc - common::pairwise_auc(&scores, positive)).abs() <= 1e-9);
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms(
        scores in prop::collection::vec(-5.0f64..5.0, 2..50),
        labels in prop::collection::vec(any::<bool>(), 50),
    ) {
        let positive = &labels[..scores.len()];
        prop_assume!(positive.iter().any(|&p| p) && positive.iter().any(|&p| !p));
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3) + 2.0).collect();
        let base = compute_auc(&scores, positive).unwrap();
        prop_assert!((base - compute_auc(&squashed, positive).unwrap()).abs() <= 1e-12);
        prop_assert!((base - compute_auc(&cubed, positive).unwrap()).abs() <= 1e-12);
    }
}
