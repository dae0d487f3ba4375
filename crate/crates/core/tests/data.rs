use std::collections::HashSet;

use n2rpp::nn::seeded_rng;
use n2rpp::preprocess::{
    aggregate_effective_avg, aggregate_max, aggregate_sum, minmax_normalize, standardize_features, Aggregation,
    FeatureVector, FootSide, Grid, ImageMeta, Label, PressureFrameSequence,
};
use n2rpp::synth::{generate_cohort, CohortSpec};
use n2rpp::{FEATURE_DIM, IMAGE_COLS, IMAGE_LEN, IMAGE_ROWS};
use proptest::prelude::*;
use rand::Rng;

/// Small sequences with roughly a third of the cells exactly zero.
fn random_sequence(rng: &mut impl Rng) -> PressureFrameSequence {
    let rows = rng.random_range(1..6);
    let cols = rng.random_range(1..6);
    let k = rng.random_range(1..5);
    let mut frames: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..rows * cols)
                .map(|_| {
                    if rng.random_bool(0.35) {
                        0.0
                    } else {
                        rng.random_range(0.0..10.0)
                    }
                })
                .collect()
        })
        .collect();
    frames[0][0] = 1.0;
    PressureFrameSequence::new(rows, cols, frames, FootSide::Left, "r", Label::Healthy).unwrap()
}

#[test]
fn aggregations_match_brute_force() {
    let mut rng = seeded_rng(2024);
    let mut zero_cells = 0;
    for _ in 0..200 {
        let seq = random_sequence(&mut rng);
        let (rows, cols) = (seq.rows(), seq.cols());
        let (max, sum, avg) = (aggregate_max(&seq), aggregate_sum(&seq), aggregate_effective_avg(&seq));
        for r in 0..rows {
            for c in 0..cols {
                let mut m = 0.0f64;
                let mut s = 0.0;
                let mut count = 0;
                for f in seq.frames() {
                    let v = f[r * cols + c];
                    m = m.max(v);
                    s += v;
                    if v != 0.0 {
                        count += 1;
                    }
                }
                let a = if count == 0 { 0.0 } else { s / count as f64 };
                zero_cells += usize::from(count == 0);
                assert!((max.get(r, c) - m).abs() <= 1e-12);
                assert!((sum.get(r, c) - s).abs() <= 1e-12);
                assert!((avg.get(r, c) - a).abs() <= 1e-12);
            }
        }
    }
    assert!(zero_cells > 0, "oracle never saw an always-zero cell");
}

fn meta() -> ImageMeta {
    ImageMeta {
        aggregation: Aggregation::Max,
        foot_side: FootSide::Right,
        case_id: "p".into(),
        label: Label::Acld,
    }
}

proptest! {
    #[test]
    fn normalization_ignores_positive_scale(values in prop::collection::vec(0.0f64..50.0, IMAGE_LEN), scale in 1e-3f64..1e3) {
        let grid = Grid::new(IMAGE_ROWS, IMAGE_COLS, values).unwrap();
        let scaled = Grid::new(IMAGE_ROWS, IMAGE_COLS, grid.data.iter().map(|v| v * scale).collect()).unwrap();
        let a = minmax_normalize(&grid, meta()).unwrap();
        let b = minmax_normalize(&scaled, meta()).unwrap();
        for (x, y) in a.grid().iter().zip(b.grid()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(a.grid().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn standardization_is_idempotent(values in prop::collection::vec(-100.0f64..100.0, FEATURE_DIM)) {
        prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-3));
        let once = standardize_features(&FeatureVector::new(values).unwrap()).unwrap();
        let twice = standardize_features(&once).unwrap();
        let mean = once.values().iter().sum::<f64>() / FEATURE_DIM as f64;
        let var = once.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / FEATURE_DIM as f64;
        prop_assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9);
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn cohort_samples_are_distinct() {
    let cohort = generate_cohort(&CohortSpec {
        frames: 2,
        ..CohortSpec::default()
    })
    .unwrap();
    assert_eq!(cohort.len(), 1000);
    let distinct: HashSet<Vec<u64>> = cohort
        .iter()
        .map(|s| s.frames().iter().flatten().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(distinct.len(), 1000);
    let ids: HashSet<&str> = cohort.iter().map(|s| s.case_id.as_str()).collect();
    assert_eq!(ids.len(), 1000);
}
