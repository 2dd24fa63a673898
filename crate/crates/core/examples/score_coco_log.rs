//! Score a saved stream log against COCO-format annotations.
//!
//! With no arguments a world is exported to COCO JSON, simulated, and the
//! log is scored against the exported annotations. Otherwise:
//!
//!     cargo run --example score_coco_log -- annotations.json stream_log.jsonl 30

use streamsim::coco::{CocoDataset, CocoGroundTruth};
use streamsim::{
    fit_shifted_lognormal, simulate, streaming_ap, ObserverSpec, PolicyKind, StreamLog,
    TrafficScenario,
};

fn main() -> streamsim::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (truth, log) = if let [coco, log, fps] = &args[..] {
        let fps: f64 = fps.parse().expect("fps is a number");
        (CocoGroundTruth::load(coco, fps)?, StreamLog::load(log)?)
    } else {
        let scenario = TrafficScenario {
            duration_frames: 150,
            num_objects: 12,
            max_speed: 10.0,
            min_width: 24.0,
            max_width: 320.0,
            num_classes: 3,
            seed: None,
        };
        let world = scenario.generate(4)?;
        let json = serde_json::to_string(&CocoDataset::from_world(&world)?)?;
        println!("exported {} bytes of COCO annotations", json.len());
        let latency = fit_shifted_lognormal(63.1, 12.7, 41.3)?.with_seed(1);
        let log = simulate(
            &world,
            &ObserverSpec::noisy(2.0, 0.05, 0.2, 1),
            &latency,
            PolicyKind::DelayAdaptive,
            &world.clock(),
        )?;
        (CocoGroundTruth::from_json(&json, world.fps)?, log)
    };
    let r = streaming_ap(&truth, &log)?;
    let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}", 100.0 * x));
    println!(
        "sAP {}  sAP50 {}  sAP75 {}  S {}  M {}  L {}",
        f(r.sap),
        f(r.sap_50),
        f(r.sap_75),
        f(r.sap_small),
        f(r.sap_medium),
        f(r.sap_large)
    );
    println!(
        "{} jobs, mean delay {:.2} ms",
        r.delay.count, r.delay.mean_ms
    );
    Ok(())
}
