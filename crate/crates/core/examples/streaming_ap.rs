//! Simulate one pipeline and score it with streaming AP, showing what the
//! output buffer holds at each query instant.
//!
//!     cargo run --example streaming_ap

use streamsim::{
    simulate, streaming_ap_window, EvalWindow, LatencyModel, ObjectTrack, ObserverSpec, PolicyKind,
    WorldSpec,
};

fn main() -> streamsim::Result<()> {
    let world = WorldSpec::new(
        60,
        vec![
            ObjectTrack::constant_velocity(0, 0, [100.0, 400.0, 260.0, 520.0], [10.0, 0.0]),
            ObjectTrack::constant_velocity(1, 1, [1600.0, 200.0, 1700.0, 280.0], [-6.0, 2.0]),
        ],
    )?;
    let clock = world.clock();
    let latency = LatencyModel::constant(50.0)?;

    for policy in PolicyKind::ALL {
        let log = simulate(&world, &ObserverSpec::oracle(), &latency, policy, &clock)?;
        let all = streaming_ap_window(&world, &log, EvalWindow::All)?;
        let steady = streaming_ap_window(&world, &log, EvalWindow::SteadyState)?;
        println!(
            "{:<16} sAP {:.4} (after warm-up {:.4})  sAP50 {:.4}  sAP75 {:.4}",
            policy.name(),
            all.sap.unwrap_or(0.0),
            steady.sap.unwrap_or(0.0),
            all.sap_50.unwrap_or(0.0),
            all.sap_75.unwrap_or(0.0)
        );
        if policy == PolicyKind::DelayAdaptive {
            println!("  query  job(frame -> target)  completion");
            for k in 0..8 {
                let q = clock.capture_time(k);
                let job = log
                    .jobs()
                    .iter()
                    .rev()
                    .find(|j| j.completion_ms <= q + 1e-9);
                match job {
                    Some(j) => println!(
                        "  {q:>6.1}  {:>3}({:>2} -> {:>2})        {:>6.1}",
                        j.job_index,
                        j.input_frame_index,
                        j.input_frame_index + j.target_step,
                        j.completion_ms
                    ),
                    None => println!("  {q:>6.1}  empty buffer"),
                }
            }
        }
    }
    Ok(())
}
