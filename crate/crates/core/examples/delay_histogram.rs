//! Delay distribution of simulated runs in each environment, with frame
//! interval markers.
//!
//!     cargo run --example delay_histogram

use std::path::Path;

use streamsim::experiment::{delay_histogram, run_policy};
use streamsim::{PolicyKind, RunConfig};

fn main() -> streamsim::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    for name in ["low", "medium", "high"] {
        let run = RunConfig::load(dir.join(format!("{name}_delay.cfg")))?.resolve(&dir)?;
        let result = run_policy(&run, PolicyKind::DelayAdaptive)?;
        let h = delay_histogram(&result.log, 4.0)?;
        let over = result
            .log
            .jobs()
            .iter()
            .filter(|j| j.total_delay_ms() > h.frame_interval_ms)
            .count();
        println!(
            "[{name}] {} jobs, {:.1}% slower than one frame interval",
            h.stats.count,
            100.0 * over as f64 / h.stats.count as f64
        );
        print!("{h}");
        println!();
    }
    Ok(())
}
