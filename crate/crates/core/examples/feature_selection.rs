//! How the delay trend picks a look-ahead and a snapshot pair from the
//! feature queue, including frame gaps and clamping to the oldest entry.
//!
//!     cargo run --example feature_selection

use streamsim::{
    estimate_delay_trend, select_features, target_step, FeatureQueue, FeatureSnapshot, FrameClock,
};

fn main() -> streamsim::Result<()> {
    let clock = FrameClock::new(30.0)?;
    println!("frame interval {:.2} ms", clock.frame_interval());

    for (pre, inf) in [(6.0, 18.0), (10.0, 30.0), (16.0, 47.0), (30.0, 300.0)] {
        let trend = estimate_delay_trend(pre, Some(inf))?;
        println!(
            "P = {pre:>5.1}  I(prev) = {inf:>5.1}  -> D = {:>5.1} ms, n = {}",
            pre + inf,
            target_step(&trend, &clock)
        );
    }

    // a busy pipeline skipped frames 11 and 14
    let mut queue = FeatureQueue::default();
    for k in [9, 10, 12, 13, 15] {
        queue.push(FeatureSnapshot::new(k, &clock, Vec::new())?)?;
    }
    let stored: Vec<usize> = queue.iter().map(|s| s.frame_index()).collect();
    println!("\nqueue holds frames {stored:?}");
    for d in [20.0, 45.0, 80.0, 120.0, 400.0] {
        let trend = estimate_delay_trend(d / 4.0, Some(d * 0.75))?;
        let sel = select_features(&queue, &trend, &clock)?;
        println!(
            "D = {d:>5.1} ms: n = {:>2}, pair ({}, {}), gap {}",
            sel.target_step,
            sel.current.frame_index(),
            sel.past.frame_index(),
            sel.effective_gap
        );
    }

    // first job: no previous inference time, so fall back to one step
    let trend = estimate_delay_trend(12.0, None)?;
    let sel = select_features(&queue, &trend, &clock)?;
    println!(
        "\nwithout a trend: n = {}, pair ({}, {})",
        sel.target_step,
        sel.current.frame_index(),
        sel.past.frame_index()
    );
    Ok(())
}
