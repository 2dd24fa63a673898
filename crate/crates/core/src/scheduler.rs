//! Delay-adaptive feature selection.
//!
//! The pipeline keeps the current snapshot plus a few previous ones in a
//! [`FeatureQueue`]. Before each forecast it estimates how long the in-flight
//! job will take (current preprocessing time plus the previous job's
//! inference time), converts that into a number of frames to look ahead, and
//! picks the stored snapshot that spans the same number of frames back.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureSnapshot, FrameClock};

/// Current frame plus four previous ones.
pub const DEFAULT_QUEUE_CAPACITY: usize = 5;

/// Forecasting behaviour of a simulated detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Report what was seen in the input frame.
    NoForecast,
    /// Always forecast exactly one frame ahead.
    FixedNextStep,
    /// Forecast as many frames ahead as the delay trend says.
    DelayAdaptive,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::NoForecast,
        PolicyKind::FixedNextStep,
        PolicyKind::DelayAdaptive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::NoForecast => "no_forecast",
            PolicyKind::FixedNextStep => "fixed_next_step",
            PolicyKind::DelayAdaptive => "delay_adaptive",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "policies",
                    format!("unknown policy `{s}` (expected no_forecast, fixed_next_step or delay_adaptive)"),
                )
            })
    }
}

/// Fixed-capacity history of snapshots, oldest first.
#[derive(Debug, Clone)]
pub struct FeatureQueue {
    capacity: usize,
    entries: VecDeque<FeatureSnapshot>,
}

impl Default for FeatureQueue {
    fn default() -> Self {
        FeatureQueue::new(DEFAULT_QUEUE_CAPACITY).expect("default capacity is valid")
    }
}

impl FeatureQueue {
    /// A queue must hold at least the current frame and one previous frame.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::config(
                "scheduler.queue_capacity",
                format!("capacity {capacity} must be at least 2"),
            ));
        }
        Ok(FeatureQueue {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    /// Appends the newest snapshot, evicting the oldest when full. Snapshots
    /// must arrive in strictly increasing frame order.
    pub fn push(&mut self, snapshot: FeatureSnapshot) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if snapshot.frame_index() <= last.frame_index() {
                return Err(Error::InvalidWorld(format!(
                    "feature queue received frame {} after frame {}",
                    snapshot.frame_index(),
                    last.frame_index()
                )));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(snapshot);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn newest(&self) -> Option<&FeatureSnapshot> {
        self.entries.back()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &FeatureSnapshot> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Estimated processing time of the in-flight job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayTrend {
    pub current_preprocess_ms: f64,
    pub last_inference_ms: Option<f64>,
    /// `None` until a previous inference time is known.
    pub trend_ms: Option<f64>,
}

impl DelayTrend {
    /// A trend pinned to a given value, bypassing the estimate.
    pub fn forced(trend_ms: f64) -> Self {
        DelayTrend {
            current_preprocess_ms: trend_ms,
            last_inference_ms: Some(0.0),
            trend_ms: Some(trend_ms),
        }
    }

    /// True when no previous inference time was available.
    pub fn is_fallback(&self) -> bool {
        self.trend_ms.is_none()
    }
}

pub fn estimate_delay_trend(
    current_preprocess_ms: f64,
    last_inference_ms: Option<f64>,
) -> Result<DelayTrend> {
    let check = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidDelay(format!("{name} = {v}")))
        }
    };
    check("current_preprocess_ms", current_preprocess_ms)?;
    if let Some(i) = last_inference_ms {
        check("last_inference_ms", i)?;
    }
    Ok(DelayTrend {
        current_preprocess_ms,
        last_inference_ms,
        trend_ms: last_inference_ms.map(|i| current_preprocess_ms + i),
    })
}

/// Frames to look ahead: `floor(trend / interval) + 1`, or 1 without a trend.
pub fn target_step(trend: &DelayTrend, clock: &FrameClock) -> usize {
    let Some(d) = trend.trend_ms else {
        return 1;
    };
    let t = clock.frame_interval();
    let mut q = (d / t).floor().max(0.0);
    // keep q consistent with the products the band boundaries are defined by
    if q * t > d {
        q -= 1.0;
    } else if (q + 1.0) * t <= d {
        q += 1.0;
    }
    q as usize + 1
}

/// Result of picking a snapshot pair from the queue.
#[derive(Debug, Clone, Copy)]
pub struct Selection<'a> {
    pub current: &'a FeatureSnapshot,
    pub past: &'a FeatureSnapshot,
    /// Frames to forecast ahead.
    pub target_step: usize,
    /// Actual frame distance between `current` and `past`.
    pub effective_gap: usize,
    /// Only the current snapshot was available; forecasts degrade to zero motion.
    pub degenerate: bool,
}

/// Picks `(F_t, F_{t-n})`. The past snapshot is the stored one whose frame
/// index is nearest `t - n`, chosen among snapshots older than `t`; on a tie
/// the more recent one wins. A history shorter than `n` therefore clamps to
/// the oldest stored snapshot.
pub fn select_features<'a>(
    queue: &'a FeatureQueue,
    trend: &DelayTrend,
    clock: &FrameClock,
) -> Result<Selection<'a>> {
    select_with_step(queue, target_step(trend, clock))
}

/// Same as [`select_features`] with an explicit look-ahead.
pub fn select_with_step(queue: &FeatureQueue, step: usize) -> Result<Selection<'_>> {
    let current = queue
        .newest()
        .ok_or_else(|| Error::InvalidWorld("feature selection on an empty queue".into()))?;
    let t = current.frame_index() as i64;
    let target = t - step as i64;
    let past = queue
        .iter()
        .rev()
        .skip(1)
        .min_by_key(|s| (s.frame_index() as i64 - target).abs());
    Ok(match past {
        Some(past) => Selection {
            current,
            past,
            target_step: step,
            effective_gap: current.frame_index() - past.frame_index(),
            degenerate: false,
        },
        None => Selection {
            current,
            past: current,
            target_step: step,
            effective_gap: 0,
            degenerate: true,
        },
    })
}
