//! Finite-difference gradient checks of every layer kind and the reduced
//! model architectures.

use n2rpp::checks::{run_suite, TOLERANCE};

fn main() -> n2rpp::Result<()> {
    let results = run_suite(0..5)?;
    for r in &results {
        println!(
            "{:<14} seed {}  params {:.2e}  input {:.2e}  {}",
            r.name,
            r.seed,
            r.report.max_param_error,
            r.report.max_input_error,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{failed} of {} checks above {TOLERANCE:e}", results.len());
    Ok(())
}
