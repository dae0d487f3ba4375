//! Trains the 1664-128-1664 autoencoder on 32 synthetic images and prints
//! the reconstruction error every 50 epochs.

use n2rpp::autoencoder::{train_autoencoder, AeConfig};
use n2rpp::preprocess::{preprocess_sequence, Aggregation};
use n2rpp::synth::{generate_cohort, CohortSpec};

fn main() -> n2rpp::Result<()> {
    let spec = CohortSpec {
        n_healthy: 16,
        n_acld: 16,
        ..CohortSpec::default()
    };
    let images = generate_cohort(&spec)?
        .iter()
        .map(|s| preprocess_sequence(s, Aggregation::Max))
        .collect::<n2rpp::Result<Vec<_>>>()?;

    let trained = train_autoencoder(&images, &AeConfig::default())?;
    for (epoch, mse) in trained.loss_history.iter().enumerate().step_by(50) {
        println!("epoch {epoch:>3}  mse {mse:.6}");
    }
    let features = trained.model.features(&images.iter().collect::<Vec<_>>())?;
    println!(
        "final mse {:.6}; first feature vector starts {:?}",
        trained.loss_history.last().unwrap(),
        &features[0].values()[..4]
    );
    Ok(())
}
