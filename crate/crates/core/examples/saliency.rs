//! Guided-backpropagation saliency of a trained classifier, summarized per
//! foot region.

use n2rpp::classifier::{train_classifier, ClfConfig};
use n2rpp::preprocess::{preprocess_sequence, Aggregation};
use n2rpp::saliency::{band_rows, guided_backprop, REGION_BANDS};
use n2rpp::synth::{generate_cohort, CohortSpec};
use n2rpp::IMAGE_COLS;

fn main() -> n2rpp::Result<()> {
    let spec = CohortSpec {
        n_healthy: 80,
        n_acld: 80,
        ..CohortSpec::default()
    };
    let images = generate_cohort(&spec)?
        .iter()
        .map(|s| preprocess_sequence(s, Aggregation::Max))
        .collect::<n2rpp::Result<Vec<_>>>()?;
    let (train, val) = images.split_at(120);
    let clf = train_classifier(
        train,
        val,
        &ClfConfig {
            epochs: 10,
            ..ClfConfig::default()
        },
    )?
    .model;

    for img in val.iter().step_by(10) {
        let map = guided_backprop(&clf, img)?;
        let mass: Vec<String> = band_rows()
            .iter()
            .zip(REGION_BANDS)
            .map(|(&(lo, hi), (name, _, _))| {
                let total: f64 = map.grid[lo * IMAGE_COLS..hi * IMAGE_COLS].iter().map(|v| v.abs()).sum();
                format!("{name} {total:.3}")
            })
            .collect();
        println!("{} ({}): {}", img.meta.case_id, img.meta.label, mass.join(", "));
    }
    Ok(())
}
