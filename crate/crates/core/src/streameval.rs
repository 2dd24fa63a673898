//! Streaming AP: at every ground-truth capture instant the output buffer is
//! queried and whatever it holds is scored against that frame's truth.

use serde::{Deserialize, Serialize};

use crate::ap::{self, Outcome, COCO_IOU_THRESHOLDS};
use crate::error::{Error, Result};
use crate::latency::DelayStats;
use crate::pipeline::StreamLog;
use crate::types::{BBox, GroundTruthFrame, SizeClass};
use crate::worldsim::WorldSpec;

/// Anything that can hand out per-frame ground truth at a fixed frame rate.
pub trait GroundTruthSource {
    fn fps(&self) -> f64;
    fn frame_count(&self) -> usize;
    fn frame(&self, index: usize) -> Result<GroundTruthFrame>;
    /// Identity of the source, checked against the log when both have one.
    fn digest(&self) -> Option<String>;
}

impl GroundTruthSource for WorldSpec {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.duration_frames
    }

    fn frame(&self, index: usize) -> Result<GroundTruthFrame> {
        self.ground_truth_at(index)
    }

    fn digest(&self) -> Option<String> {
        Some(WorldSpec::digest(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMatch {
    pub frame_index: usize,
    pub ground_truth: usize,
    pub predictions: usize,
    /// True positives at IoU 0.5.
    pub matched: usize,
}

/// Streaming AP summary. AP values are fractions in `[0, 1]`; `None` means
/// the subset had no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean over IoU thresholds 0.50:0.05:0.95.
    pub sap: Option<f64>,
    pub sap_50: Option<f64>,
    pub sap_75: Option<f64>,
    /// Mean of `sap_50` and `sap_75`.
    pub sap_50_75: Option<f64>,
    pub sap_small: Option<f64>,
    pub sap_medium: Option<f64>,
    pub sap_large: Option<f64>,
    pub delay: DelayStats,
    pub frames: Vec<FrameMatch>,
}

/// Which frames enter the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalWindow {
    /// Every frame of the sequence.
    #[default]
    All,
    /// Frames queried at or after the completion of the first job that ran
    /// with a measured delay trend, i.e. after pipeline warm-up.
    SteadyState,
}

pub fn streaming_ap(truth: &impl GroundTruthSource, log: &StreamLog) -> Result<EvalReport> {
    streaming_ap_window(truth, log, EvalWindow::All)
}

pub fn streaming_ap_window(
    truth: &impl GroundTruthSource,
    log: &StreamLog,
    window: EvalWindow,
) -> Result<EvalReport> {
    if let (Some(logged), Some(actual)) = (&log.header().world_digest, truth.digest()) {
        if *logged != actual {
            return Err(Error::DigestMismatch {
                log: logged.clone(),
                truth: actual,
            });
        }
    }
    if (log.header().fps - truth.fps()).abs() > 1e-9 {
        return Err(Error::config(
            "clock.fps",
            format!(
                "log recorded at {} fps, ground truth at {} fps",
                log.header().fps,
                truth.fps()
            ),
        ));
    }
    let clock = log.clock();
    let first_frame = match window {
        EvalWindow::All => 0,
        EvalWindow::SteadyState => log
            .jobs()
            .iter()
            .find(|j| j.trend_ms.is_some())
            .and_then(|j| {
                (0..truth.frame_count()).find(|&k| clock.capture_time(k) + 1e-9 >= j.completion_ms)
            })
            .unwrap_or(truth.frame_count()),
    };

    let mut predictions: Vec<Vec<BBox>> = Vec::new();
    let mut truths: Vec<Vec<BBox>> = Vec::new();
    let mut frame_ids = Vec::new();
    for k in first_frame..truth.frame_count() {
        predictions.push(log.query_buffer(clock.capture_time(k)).to_vec());
        truths.push(truth.frame(k)?.boxes);
        frame_ids.push(k);
    }

    let mean_over_thresholds = |size: Option<SizeClass>| -> Option<f64> {
        let aps: Option<Vec<f64>> = COCO_IOU_THRESHOLDS
            .iter()
            .map(|&t| ap::average_precision_filtered(&predictions, &truths, t, size))
            .collect();
        aps.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let sap_50 = ap::average_precision(&predictions, &truths, 0.50);
    let sap_75 = ap::average_precision(&predictions, &truths, 0.75);

    let mut matched = vec![0usize; frame_ids.len()];
    for class in ap::classes_with_truth(&truths, None) {
        let (ranked, _) = ap::match_class(&predictions, &truths, class, 0.50, None);
        for d in ranked.iter().filter(|d| d.outcome == Outcome::TruePositive) {
            matched[d.image] += 1;
        }
    }
    let frames = frame_ids
        .iter()
        .enumerate()
        .map(|(i, &k)| FrameMatch {
            frame_index: k,
            ground_truth: truths[i].len(),
            predictions: predictions[i].len(),
            matched: matched[i],
        })
        .collect();

    Ok(EvalReport {
        sap: mean_over_thresholds(None),
        sap_50,
        sap_75,
        sap_50_75: sap_50.zip(sap_75).map(|(a, b)| (a + b) / 2.0),
        sap_small: mean_over_thresholds(Some(SizeClass::Small)),
        sap_medium: mean_over_thresholds(Some(SizeClass::Medium)),
        sap_large: mean_over_thresholds(Some(SizeClass::Large)),
        delay: *log.delay_stats(),
        frames,
    })
}
