//! Shared geometry and frame vocabulary.
//!
//! Every [`BBox`] is validated at construction, so downstream code never sees
//! a zero-area or inverted box.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to millisecond timestamp comparisons so that values that
/// are equal up to float accumulation count as simultaneous.
pub const TIME_EPS_MS: f64 = 1e-9;

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    class_id: u32,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    track_id: Option<i64>,
}

#[derive(Deserialize)]
struct RawBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    class_id: u32,
    #[serde(default = "one")]
    score: f64,
    #[serde(default)]
    track_id: Option<i64>,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawBox> for BBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        let b = BBox::new(raw.x1, raw.y1, raw.x2, raw.y2, raw.class_id)?.with_score(raw.score)?;
        Ok(match raw.track_id {
            Some(id) => b.with_track(id),
            None => b,
        })
    }
}

impl BBox {
    /// Builds a box with score 1.0 and no track identity.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, class_id: u32) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x1,
            y1,
            x2,
            y2,
            reason,
        };
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if x2 <= x1 || y2 <= y1 {
            return Err(invalid("width and height must be strictly positive"));
        }
        Ok(BBox {
            x1,
            y1,
            x2,
            y2,
            class_id,
            score: 1.0,
            track_id: None,
        })
    }

    /// Builds a box from COCO `[x, y, w, h]` layout.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64, class_id: u32) -> Result<Self> {
        BBox::new(x, y, x + w, y + h, class_id)
    }

    pub fn with_score(mut self, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidBox {
                x1: self.x1,
                y1: self.y1,
                x2: self.x2,
                y2: self.y2,
                reason: "score outside [0, 1]",
            });
        }
        self.score = score;
        Ok(self)
    }

    pub fn with_track(mut self, track_id: i64) -> Self {
        self.track_id = Some(track_id);
        self
    }

    pub fn without_track(mut self) -> Self {
        self.track_id = None;
        self
    }

    /// Same class, score and identity at new coordinates.
    pub fn with_coords(&self, [x1, y1, x2, y2]: [f64; 4]) -> Result<Self> {
        let mut b = BBox::new(x1, y1, x2, y2, self.class_id)?;
        b.score = self.score;
        b.track_id = self.track_id;
        Ok(b)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        self.with_coords([self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy])
    }

    /// Clips the box to `[0, width] x [0, height]`. Returns `None` when the
    /// clipped box is narrower or shorter than one pixel.
    pub fn clamped(&self, width: f64, height: f64) -> Option<Self> {
        let x1 = self.x1.clamp(0.0, width);
        let x2 = self.x2.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        let y2 = self.y2.clamp(0.0, height);
        if x2 - x1 < 1.0 || y2 - y1 < 1.0 {
            return None;
        }
        self.with_coords([x1, y1, x2, y2]).ok()
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn track_id(&self) -> Option<i64> {
        self.track_id
    }

    pub fn size_class(&self) -> SizeClass {
        SizeClass::of_area(self.area())
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.area() + b.area() - inter)
}

/// COCO object-size buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const SMALL_MAX_AREA: f64 = 32.0 * 32.0;
    pub const LARGE_MIN_AREA: f64 = 96.0 * 96.0;

    pub fn of_area(area: f64) -> Self {
        if area < Self::SMALL_MAX_AREA {
            SizeClass::Small
        } else if area > Self::LARGE_MIN_AREA {
            SizeClass::Large
        } else {
            SizeClass::Medium
        }
    }
}

/// Sensor frame timing. `frame_interval` is always `1000 / fps` milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClock")]
pub struct FrameClock {
    fps: f64,
    #[serde(skip)]
    frame_interval: f64,
}

#[derive(Deserialize)]
struct RawClock {
    fps: f64,
}

impl TryFrom<RawClock> for FrameClock {
    type Error = Error;

    fn try_from(raw: RawClock) -> Result<Self> {
        FrameClock::new(raw.fps)
    }
}

impl FrameClock {
    pub fn new(fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidClock(fps));
        }
        Ok(FrameClock {
            fps,
            frame_interval: 1000.0 / fps,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Inter-frame time in milliseconds.
    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    /// Capture instant of frame `k`, computed as `k * 1000 / fps` so integer
    /// multiples of the interval land on exact values where possible.
    pub fn capture_time(&self, frame_index: usize) -> f64 {
        frame_index as f64 * 1000.0 / self.fps
    }

    /// Newest frame whose capture instant is at or before `time_ms`.
    pub fn newest_frame_at(&self, time_ms: f64) -> Option<usize> {
        if time_ms + TIME_EPS_MS < 0.0 {
            return None;
        }
        let mut k = (time_ms * self.fps / 1000.0).floor().max(0.0) as usize;
        while self.capture_time(k) > time_ms + TIME_EPS_MS {
            if k == 0 {
                return None;
            }
            k -= 1;
        }
        while self.capture_time(k + 1) <= time_ms + TIME_EPS_MS {
            k += 1;
        }
        Some(k)
    }
}

/// Per-frame detector observation; the stand-in for an image feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSnapshot {
    frame_index: usize,
    capture_time: f64,
    boxes: Vec<BBox>,
}

impl FeatureSnapshot {
    /// Fails if two boxes share a track id.
    pub fn new(frame_index: usize, clock: &FrameClock, boxes: Vec<BBox>) -> Result<Self> {
        let mut seen = HashSet::new();
        for b in &boxes {
            if let Some(id) = b.track_id() {
                if !seen.insert(id) {
                    return Err(Error::InvalidWorld(format!(
                        "duplicate track id {id} in snapshot of frame {frame_index}"
                    )));
                }
            }
        }
        Ok(FeatureSnapshot {
            frame_index,
            capture_time: clock.capture_time(frame_index),
            boxes,
        })
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn capture_time(&self) -> f64 {
        self.capture_time
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }
}

/// Annotated truth for one frame. Scores on these boxes are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_index: usize,
    pub boxes: Vec<BBox>,
    pub image_width: f64,
    pub image_height: f64,
}
