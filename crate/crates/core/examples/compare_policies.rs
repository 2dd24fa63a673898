//! Paired policy comparison from a config file.
//!
//!     cargo run --example compare_policies -- crates/core/examples/high_delay.cfg

use std::path::Path;

use streamsim::experiment::{compare, compare_table, write_compare_csv};
use streamsim::RunConfig;

fn main() -> streamsim::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/high_delay.cfg").to_string()
    });
    let path = Path::new(&path);
    let config = RunConfig::load(path)?;
    let run = config.resolve(path.parent().unwrap_or(Path::new(".")))?;
    let results = compare(&run, &run.config.policies)?;
    print!("{}", compare_table(&results));
    println!();
    write_compare_csv(&results, std::io::stdout())?;
    Ok(())
}
