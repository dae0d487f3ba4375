//! Generates a few synthetic feet, aggregates them three ways and writes
//! the normalized images as PGM files.

use std::path::Path;

use n2rpp::formats::write_pgm;
use n2rpp::preprocess::{preprocess_sequence, Aggregation};
use n2rpp::synth::{generate_cohort, CohortSpec};
use n2rpp::{IMAGE_COLS, IMAGE_ROWS};

fn main() -> n2rpp::Result<()> {
    let spec = CohortSpec {
        n_healthy: 2,
        n_acld: 2,
        ..CohortSpec::default()
    };
    let out = Path::new("target/example_synth");
    for seq in generate_cohort(&spec)? {
        for kind in Aggregation::ALL {
            let img = preprocess_sequence(&seq, kind)?;
            println!(
                "{} {:<7} {kind}: p_min {:.3} p_max {:.3}",
                seq.case_id, seq.label, img.p_min, img.p_max
            );
            write_pgm(
                &out.join(format!("{}_{kind}.pgm", seq.case_id)),
                img.grid(),
                IMAGE_ROWS,
                IMAGE_COLS,
            )?;
        }
    }
    println!("images in {}", out.display());
    Ok(())
}
