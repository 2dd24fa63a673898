//! Generate a traffic scene, observe two frames and forecast ahead with
//! two-point extrapolation, comparing against the true future boxes.
//!
//!     cargo run --example extrapolate_world

use streamsim::{extrapolate, iou, observe, ObserverSpec, TrafficScenario};

fn main() -> streamsim::Result<()> {
    let scenario = TrafficScenario {
        duration_frames: 120,
        num_objects: 6,
        max_speed: 12.0,
        min_width: 48.0,
        max_width: 320.0,
        num_classes: 3,
        seed: None,
    };
    let world = scenario.generate(2)?;
    let t = 60;
    for (label, observer) in [
        ("oracle", ObserverSpec::oracle()),
        ("noisy", ObserverSpec::noisy(2.0, 0.0, 0.0, 1)),
    ] {
        println!("[{label} observer]");
        for gap in 1..=4 {
            let current = observe(&world, t, &observer)?;
            let past = observe(&world, t - gap, &observer)?;
            let forecast = extrapolate(&current, &past, gap);
            let truth = world.ground_truth_at(t + gap)?.boxes;
            // objects present in both snapshots
            let scores: Vec<f64> = forecast
                .iter()
                .filter(|f| past.boxes().iter().any(|p| p.track_id() == f.track_id()))
                .filter_map(|f| {
                    truth
                        .iter()
                        .find(|g| g.track_id() == f.track_id())
                        .map(|g| iou(f, g))
                })
                .collect();
            let mean_iou = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
            println!(
                "  gap {gap}: {} tracked objects at frame {}, mean IoU with truth {mean_iou:.4}",
                scores.len(),
                t + gap
            );
        }
    }
    Ok(())
}
