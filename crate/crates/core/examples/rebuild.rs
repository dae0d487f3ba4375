//! The whole rebuild pipeline at reduced scale: autoencoder features,
//! adversarial training, then the fraction of rebuilt patients the
//! classifier accepts as healthy and where the pressure moved.

use n2rpp::autoencoder::{train_autoencoder, AeConfig};
use n2rpp::classifier::{evaluate_rebuilds, train_classifier, ClfConfig};
use n2rpp::gan::{rebuild_batch, train_n2rpp_with, GanConfig};
use n2rpp::preprocess::{preprocess_sequence, Aggregation, Label, PressureImage};
use n2rpp::saliency::{diff_heatmap, region_stats};
use n2rpp::synth::{generate_cohort, CohortSpec};

fn main() -> n2rpp::Result<()> {
    let spec = CohortSpec {
        n_healthy: 160,
        n_acld: 160,
        ..CohortSpec::default()
    };
    let images = generate_cohort(&spec)?
        .iter()
        .map(|s| preprocess_sequence(s, Aggregation::Max))
        .collect::<n2rpp::Result<Vec<_>>>()?;
    // Even indices train, odd indices are held out.
    let (train, held): (Vec<_>, Vec<_>) = images.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
    let strip = |v: Vec<(usize, PressureImage)>| v.into_iter().map(|(_, img)| img).collect::<Vec<_>>();
    let (train, held) = (strip(train), strip(held));

    let clf = train_classifier(&train, &held, &ClfConfig::default())?.model;
    let ae = train_autoencoder(
        &train,
        &AeConfig {
            epochs: 200,
            ..AeConfig::default()
        },
    )?
    .model;

    let (healthy, patients): (Vec<_>, Vec<_>) = train.into_iter().partition(|i| i.meta.label == Label::Healthy);
    let cfg = GanConfig {
        iterations: 600,
        ..GanConfig::default()
    };
    let gan = train_n2rpp_with(&patients, &healthy, &ae, &cfg, |row, _, _| {
        if row.iteration % 100 == 0 {
            println!(
                "iteration {:>4}  l_G {:.4}  l_D {:.4}  d_acc {:.2}",
                row.iteration, row.g_loss, row.d_loss, row.d_accuracy
            );
        }
    })?;

    let held_patients: Vec<&PressureImage> = held.iter().filter(|i| i.meta.label == Label::Acld).collect();
    let rebuilt = rebuild_batch(&held_patients, &ae, &gan.generator)?;
    println!("rebuild pass rate {:.3}", evaluate_rebuilds(&clf, &rebuilt)?);

    let mut mean = [0.0; 4];
    for (orig, reb) in held_patients.iter().zip(&rebuilt) {
        let stats = region_stats(&diff_heatmap(orig, reb)?).as_array();
        mean.iter_mut()
            .zip(stats)
            .for_each(|(m, s)| *m += s / rebuilt.len() as f64);
    }
    println!(
        "mean change: toes {:+.4} forefoot {:+.4} midfoot {:+.4} heel {:+.4}",
        mean[0], mean[1], mean[2], mean[3]
    );
    Ok(())
}
