//! Discrete-event simulation of a streaming perception pipeline.
//!
//! A synthetic (or COCO-annotated) world is observed frame by frame by a
//! detector whose per-frame delay is drawn from a latency model. While a
//! frame is being processed newer frames arrive and the stale ones are
//! dropped. A scheduling policy decides what the detector emits:
//!
//! * [`PolicyKind::NoForecast`] emits the boxes of the processed frame.
//! * [`PolicyKind::FixedNextStep`] forecasts one frame ahead.
//! * [`PolicyKind::DelayAdaptive`] estimates the upcoming delay from the
//!   current preprocessing time and the previous inference time, turns it
//!   into a look-ahead of `floor(delay / frame_interval) + 1` frames, and
//!   forecasts that far using a matching older snapshot from a small
//!   feature queue.
//!
//! Output is scored with streaming AP: at every capture instant the output
//! buffer is queried and whatever it holds is compared with that instant's
//! ground truth.
//!
//! ```
//! use streamsim::{simulate, streaming_ap, FrameClock, LatencyModel, ObjectTrack, ObserverSpec,
//!                 PolicyKind, WorldSpec};
//!
//! let world = WorldSpec::new(
//!     90,
//!     vec![ObjectTrack::constant_velocity(0, 0, [100.0, 100.0, 220.0, 200.0], [2.0, 0.0])],
//! )?;
//! let clock = FrameClock::new(30.0)?;
//! let latency = LatencyModel::constant(50.0)?;
//! let log = simulate(&world, &ObserverSpec::oracle(), &latency, PolicyKind::DelayAdaptive, &clock)?;
//! let report = streaming_ap(&world, &log)?;
//! assert!(report.sap.unwrap() > 0.9);
//! # Ok::<(), streamsim::Error>(())
//! ```

pub mod ap;
pub mod coco;
pub mod config;
pub mod error;
pub mod experiment;
pub mod latency;
pub mod pipeline;
pub mod scheduler;
pub mod streameval;
pub mod types;
pub mod worldsim;

pub use ap::{average_precision, average_precision_filtered, COCO_IOU_THRESHOLDS, RECALL_POINTS};
pub use coco::{CocoDataset, CocoGroundTruth};
pub use config::{ResolvedRun, RunConfig};
pub use error::{Error, Result};
pub use latency::{
    fit_shifted_lognormal, load_trace, read_trace, save_trace, write_trace, DelaySample,
    DelayStats, DelayTrace, LatencyKind, LatencyModel,
};
pub use pipeline::{simulate, simulate_with, LogHeader, PipelineJob, PipelineOptions, StreamLog};
pub use scheduler::{
    estimate_delay_trend, select_features, select_with_step, target_step, DelayTrend, FeatureQueue,
    PolicyKind, Selection,
};
pub use streameval::{
    streaming_ap, streaming_ap_window, EvalReport, EvalWindow, FrameMatch, GroundTruthSource,
};
pub use types::{iou, BBox, FeatureSnapshot, FrameClock, GroundTruthFrame, SizeClass, TIME_EPS_MS};
pub use worldsim::{
    associate_by_iou, extrapolate, observe, ObjectTrack, ObserverKind, ObserverSpec,
    TrafficScenario, WorldSpec,
};
