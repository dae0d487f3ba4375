#![allow(dead_code)]

use n2rpp::preprocess::{preprocess_sequence, Aggregation, PressureImage};
use n2rpp::synth::{generate_cohort, CohortSpec};

/// Max-aggregated images of a small default-shaped cohort.
pub fn images(n_healthy: usize, n_acld: usize, seed: u64) -> Vec<PressureImage> {
    let spec = CohortSpec {
        n_healthy,
        n_acld,
        seed,
        ..CohortSpec::default()
    };
    generate_cohort(&spec)
        .unwrap()
        .iter()
        .map(|s| preprocess_sequence(s, Aggregation::Max).unwrap())
        .collect()
}

/// Foot mask IoU at the given binarization threshold.
pub fn mask_iou(a: &[f64], b: &[f64], threshold: f64) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x > threshold, y > threshold);
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// AUC by counting every positive/negative pair, ties worth one half.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}
