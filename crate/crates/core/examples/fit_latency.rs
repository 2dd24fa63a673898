//! Fit shifted log-normal delay models to summary statistics and check
//! them by sampling.
//!
//!     cargo run --example fit_latency

use streamsim::experiment::fit_latency;

fn main() -> streamsim::Result<()> {
    let environments = [
        ("low", 24.1, 3.66, 21.9),
        ("medium", 39.3, 9.22, 22.3),
        ("high", 63.1, 12.7, 41.3),
    ];
    for (name, mean, std, min) in environments {
        println!("[{name}]");
        println!("{}\n", fit_latency(mean, std, min, 15_000, 0)?);
    }
    Ok(())
}
