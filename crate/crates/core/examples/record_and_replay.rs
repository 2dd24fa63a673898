//! Record the delays of a simulated run as CSV, then replay them so a
//! second run sees exactly the same timing.
//!
//!     cargo run --example record_and_replay

use streamsim::{
    fit_shifted_lognormal, read_trace, simulate, write_trace, DelayTrace, LatencyModel,
    ObjectTrack, ObserverSpec, PolicyKind, WorldSpec,
};

fn main() -> streamsim::Result<()> {
    let world = WorldSpec::new(
        90,
        vec![ObjectTrack::constant_velocity(
            0,
            0,
            [200.0, 200.0, 360.0, 300.0],
            [8.0, 0.0],
        )],
    )?;
    let clock = world.clock();
    let model = fit_shifted_lognormal(39.3, 9.22, 22.3)?.with_seed(3);
    let first = simulate(
        &world,
        &ObserverSpec::oracle(),
        &model,
        PolicyKind::DelayAdaptive,
        &clock,
    )?;

    let trace = DelayTrace::new(first.jobs().iter().map(|j| j.delay()).collect());
    let mut csv = Vec::new();
    write_trace(&trace, &mut csv)?;
    println!("recorded {} delays, first rows:", trace.len());
    for line in String::from_utf8_lossy(&csv).lines().take(4) {
        println!("  {line}");
    }

    let replay = LatencyModel::replay(read_trace(csv.as_slice())?, "<memory>");
    let second = simulate(
        &world,
        &ObserverSpec::oracle(),
        &replay,
        PolicyKind::DelayAdaptive,
        &clock,
    )?;
    println!("replayed run identical: {}", first.jobs() == second.jobs());
    Ok(())
}
