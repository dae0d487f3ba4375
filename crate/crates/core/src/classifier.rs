//! Healthy-vs-ACLD classifier used to judge rebuilt images, with
//! stratified splitting and ROC AUC.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gan::image_batch;
use crate::nn::{bce_loss, seeded_rng, AdamConfig, AdamState, BackwardOptions, ConvSpec, LayerSpec, Network, Tensor};
use crate::preprocess::{Label, PressureImage};
use crate::{IMAGE_COLS, IMAGE_ROWS};

/// Score at or above which an image is called healthy.
pub const THRESHOLD: f64 = 0.5;

pub fn classifier_layers_with(height: usize, width: usize, c1: usize, c2: usize, hidden: usize) -> Vec<LayerSpec> {
    let (h2, w2) = (height / 2, width / 2);
    vec![
        LayerSpec::Conv2d(ConvSpec::k4s2(1, c1, height, width)),
        LayerSpec::leaky_relu(),
        LayerSpec::Conv2d(ConvSpec::k4s2(c1, c2, h2, w2)),
        LayerSpec::leaky_relu(),
        LayerSpec::Flatten,
        LayerSpec::Dense {
            inputs: c2 * (h2 / 2) * (w2 / 2),
            outputs: hidden,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            inputs: hidden,
            outputs: 1,
        },
        LayerSpec::Sigmoid,
    ]
}

pub fn classifier_layers() -> Vec<LayerSpec> {
    classifier_layers_with(IMAGE_ROWS, IMAGE_COLS, 8, 16, 64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    net: Network,
    trained: bool,
}

impl ClassifierModel {
    pub fn untrained(seed: u64) -> Self {
        let net = Network::init(classifier_layers(), &[1, IMAGE_ROWS, IMAGE_COLS], &mut seeded_rng(seed))
            .expect("static architecture");
        ClassifierModel { net, trained: false }
    }

    pub fn from_network(net: Network) -> Result<Self> {
        if net.layers() != classifier_layers().as_slice() {
            return Err(Error::InvalidInput("network is not the classifier architecture".into()));
        }
        Ok(ClassifierModel { net, trained: true })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Probability that the image is healthy.
    pub fn predict(&self, img: &PressureImage) -> Result<f64> {
        Ok(self.predict_batch(&[img])?[0])
    }

    pub fn predict_batch(&self, images: &[&PressureImage]) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        let mut scores = Vec::with_capacity(images.len());
        for chunk in images.chunks(64) {
            scores.extend(self.net.predict(&image_batch(chunk)?)?.into_data());
        }
        Ok(scores)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.7,
            val: 0.1,
            test: 0.2,
            seed: 42,
        }
    }
}

/// Indices into the input list, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Minimum number of samples per class accepted by [`split_dataset`].
pub const MIN_PER_CLASS: usize = 10;

/// Stratified, seeded partition.
pub fn split_dataset(labels: &[Label], spec: &SplitSpec) -> Result<Split> {
    let fractions = [spec.train, spec.val, spec.test];
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {:?} must be in [0, 1] and sum to 1",
            fractions
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [Label::Healthy, Label::Acld] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < MIN_PER_CLASS {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} samples, need at least {MIN_PER_CLASS}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (n * spec.train).round() as usize;
        let n_val = ((n * spec.val).round() as usize).min(idx.len() - n_train);
        split.train.extend_from_slice(&idx[..n_train]);
        split.val.extend_from_slice(&idx[n_train..n_train + n_val]);
        split.test.extend_from_slice(&idx[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClfConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClfConfig {
    fn default() -> Self {
        ClfConfig {
            epochs: 30,
            batch: 32,
            lr: 1e-3,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct ClfTraining {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: ClassifierModel,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

fn accuracy(scores: &[f64], labels: &[Label]) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= THRESHOLD) == (l == Label::Healthy))
        .count();
    correct as f64 / scores.len() as f64
}

/// Adam on binary cross-entropy, keeping the best-validation checkpoint.
pub fn train_classifier(train: &[PressureImage], val: &[PressureImage], cfg: &ClfConfig) -> Result<ClfTraining> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("classifier training split"));
    }
    if val.is_empty() {
        return Err(Error::EmptyDataset("classifier validation split"));
    }
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(Error::Config("classifier epochs and batch must be positive".into()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut model = ClassifierModel::untrained(cfg.seed);
    let mut adam = AdamState::new(
        &model.net.params,
        AdamConfig {
            lr: cfg.lr,
            beta1: 0.9,
            ..Default::default()
        },
    );
    let train_refs: Vec<&PressureImage> = train.iter().collect();
    let val_refs: Vec<&PressureImage> = val.iter().collect();
    let train_labels: Vec<Label> = train.iter().map(|i| i.meta.label).collect();
    let val_labels: Vec<Label> = val.iter().map(|i| i.meta.label).collect();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Network)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let x = image_batch(&chunk.iter().map(|&i| &train[i]).collect::<Vec<_>>())?;
            let cache = model.net.forward(&x)?;
            let n = chunk.len() as f64;
            let mut upstream = Vec::with_capacity(chunk.len());
            for (&i, &p) in chunk.iter().zip(cache.output().data()) {
                let (l, g) = bce_loss(p, train[i].meta.label.target());
                total += l;
                upstream.push(g / n);
            }
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: epoch });
            }
            let upstream = Tensor::new(vec![chunk.len(), 1], upstream)?;
            let grads = model.net.backward(&cache, &upstream, BackwardOptions::params_only())?;
            adam.update(&mut model.net.params, &grads.params)?;
        }
        model.trained = true;
        let stats = EpochStats {
            epoch,
            train_loss: total / train.len() as f64,
            train_accuracy: accuracy(&model.predict_batch(&train_refs)?, &train_labels),
            val_accuracy: accuracy(&model.predict_batch(&val_refs)?, &val_labels),
        };
        if best.as_ref().is_none_or(|(acc, _, _)| stats.val_accuracy > *acc) {
            best = Some((stats.val_accuracy, epoch, model.net.clone()));
        }
        history.push(stats);
    }
    let (_, best_epoch, net) = best.expect("at least one epoch");
    Ok(ClfTraining {
        model: ClassifierModel { net, trained: true },
        best_epoch,
        history,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from midranks.
pub fn compute_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| positive[k]).count();
        rank_sum += mid * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-sample outcome stored in an [`EvalReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampleScore {
    pub case_id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub auc: f64,
    pub threshold: f64,
    pub samples: Vec<SampleScore>,
    /// Fraction of rebuilt patient images called healthy, when evaluated.
    pub rebuild_pass_rate: Option<f64>,
}

impl EvalReport {
    /// `(TP + TN) / N` recomputed from the stored scores and threshold.
    pub fn recompute_accuracy(&self) -> f64 {
        let scores: Vec<f64> = self.samples.iter().map(|s| s.score).collect();
        let labels: Vec<Label> = self.samples.iter().map(|s| s.label).collect();
        let correct = scores
            .iter()
            .zip(&labels)
            .filter(|(&s, &l)| (s >= self.threshold) == (l == Label::Healthy))
            .count();
        correct as f64 / scores.len() as f64
    }
}

/// Accuracy and AUC on a labeled set containing both classes.
pub fn evaluate(model: &ClassifierModel, images: &[PressureImage]) -> Result<EvalReport> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("evaluation set"));
    }
    let refs: Vec<&PressureImage> = images.iter().collect();
    let scores = model.predict_batch(&refs)?;
    let labels: Vec<Label> = images.iter().map(|i| i.meta.label).collect();
    let positive: Vec<bool> = labels.iter().map(|&l| l == Label::Healthy).collect();
    Ok(EvalReport {
        accuracy: accuracy(&scores, &labels),
        auc: compute_auc(&scores, &positive)?,
        threshold: THRESHOLD,
        samples: images
            .iter()
            .zip(&scores)
            .map(|(img, &score)| SampleScore {
                case_id: img.meta.case_id.clone(),
                label: img.meta.label,
                score,
            })
            .collect(),
        rebuild_pass_rate: None,
    })
}

/// Fraction of rebuilt patient images the classifier calls healthy.
pub fn evaluate_rebuilds(model: &ClassifierModel, rebuilt: &[PressureImage]) -> Result<f64> {
    if rebuilt.is_empty() {
        return Err(Error::EmptyDataset("rebuilt images"));
    }
    Ok(pass_rate(&model.predict_batch(&rebuilt.iter().collect::<Vec<_>>())?))
}

pub fn pass_rate(scores: &[f64]) -> f64 {
    scores.iter().filter(|&&s| s >= THRESHOLD).count() as f64 / scores.len() as f64
}
