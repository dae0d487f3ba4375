//! Stratified split, classifier training with early stopping, and test
//! accuracy and AUC on a 150/150 synthetic cohort.

use n2rpp::classifier::{evaluate, split_dataset, train_classifier, ClfConfig, SplitSpec};
use n2rpp::preprocess::{preprocess_sequence, Aggregation, PressureImage};
use n2rpp::synth::{generate_cohort, CohortSpec};

fn main() -> n2rpp::Result<()> {
    let spec = CohortSpec {
        n_healthy: 150,
        n_acld: 150,
        ..CohortSpec::default()
    };
    let images = generate_cohort(&spec)?
        .iter()
        .map(|s| preprocess_sequence(s, Aggregation::Max))
        .collect::<n2rpp::Result<Vec<_>>>()?;
    let labels: Vec<_> = images.iter().map(|i| i.meta.label).collect();
    let split = split_dataset(&labels, &SplitSpec::default())?;
    let pick = |idx: &[usize]| -> Vec<PressureImage> { idx.iter().map(|&i| images[i].clone()).collect() };

    let trained = train_classifier(&pick(&split.train), &pick(&split.val), &ClfConfig::default())?;
    for e in &trained.history {
        println!(
            "epoch {:>2}  loss {:.4}  train acc {:.3}  val acc {:.3}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_accuracy
        );
    }
    let report = evaluate(&trained.model, &pick(&split.test))?;
    println!(
        "best epoch {}; test accuracy {:.3}, AUC {:.4} on {} images",
        trained.best_epoch,
        report.accuracy,
        report.auc,
        report.samples.len()
    );
    Ok(())
}
