//! Synthetic driving-scene world with analytic object motion, plus detector
//! stand-ins and the two-snapshot motion extrapolator.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{iou, BBox, FeatureSnapshot, FrameClock, GroundTruthFrame};

pub const WORLD_SCHEMA_VERSION: u32 = 1;

/// Minimum IoU for the id-free association fallback.
pub const ASSOCIATION_IOU: f64 = 0.3;

/// One object following `initial + v*k + a*k^2/2`, `k` frames after spawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub track_id: i64,
    pub class_id: u32,
    /// `[x1, y1, x2, y2]` at the spawn frame.
    pub initial: [f64; 4],
    /// Pixels per frame.
    pub velocity: [f64; 2],
    /// Pixels per frame squared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<[f64; 2]>,
    #[serde(default)]
    pub spawn_frame: usize,
    /// First frame the object is gone; `None` keeps it to the end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub despawn_frame: Option<usize>,
}

impl ObjectTrack {
    pub fn constant_velocity(
        track_id: i64,
        class_id: u32,
        initial: [f64; 4],
        velocity: [f64; 2],
    ) -> Self {
        ObjectTrack {
            track_id,
            class_id,
            initial,
            velocity,
            acceleration: None,
            spawn_frame: 0,
            despawn_frame: None,
        }
    }

    pub fn is_live(&self, frame_index: usize) -> bool {
        frame_index >= self.spawn_frame && self.despawn_frame.is_none_or(|d| frame_index < d)
    }

    /// Unclamped position at `frame_index`, if the object is live.
    pub fn position_at(&self, frame_index: usize) -> Option<[f64; 4]> {
        if !self.is_live(frame_index) {
            return None;
        }
        let k = (frame_index - self.spawn_frame) as f64;
        let [ax, ay] = self.acceleration.unwrap_or([0.0, 0.0]);
        let dx = self.velocity[0] * k + 0.5 * ax * k * k;
        let dy = self.velocity[1] * k + 0.5 * ay * k * k;
        let [x1, y1, x2, y2] = self.initial;
        Some([x1 + dx, y1 + dy, x2 + dx, y2 + dy])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub schema_version: u32,
    pub image_width: f64,
    pub image_height: f64,
    pub fps: f64,
    pub duration_frames: usize,
    pub objects: Vec<ObjectTrack>,
    #[serde(default)]
    pub seed: u64,
}

impl WorldSpec {
    /// A 1920x1080, 30 FPS world.
    pub fn new(duration_frames: usize, objects: Vec<ObjectTrack>) -> Result<Self> {
        let w = WorldSpec {
            schema_version: WORLD_SCHEMA_VERSION,
            image_width: 1920.0,
            image_height: 1080.0,
            fps: 30.0,
            duration_frames,
            objects,
            seed: 0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorld(m));
        if self.schema_version != WORLD_SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {WORLD_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.duration_frames < 2 {
            return bad(format!(
                "duration_frames = {} (need at least 2)",
                self.duration_frames
            ));
        }
        if self.objects.is_empty() {
            return bad("world has no objects".into());
        }
        if !(self.image_width >= 1.0 && self.image_height >= 1.0)
            || !self.image_width.is_finite()
            || !self.image_height.is_finite()
        {
            return bad(format!(
                "image size {}x{}",
                self.image_width, self.image_height
            ));
        }
        FrameClock::new(self.fps)?;
        let mut ids = HashSet::new();
        for o in &self.objects {
            if o.track_id < 0 {
                return bad(format!(
                    "track id {} is negative (reserved for false positives)",
                    o.track_id
                ));
            }
            if !ids.insert(o.track_id) {
                return bad(format!("duplicate track id {}", o.track_id));
            }
            if o.despawn_frame.is_some_and(|d| d <= o.spawn_frame) {
                return bad(format!("track {} despawns before it spawns", o.track_id));
            }
            let [x1, y1, x2, y2] = o.initial;
            BBox::new(x1, y1, x2, y2, o.class_id)?;
            let finite = o
                .velocity
                .iter()
                .chain(o.acceleration.iter().flatten())
                .all(|v| v.is_finite());
            if !finite {
                return bad(format!("track {} has non-finite motion", o.track_id));
            }
        }
        Ok(())
    }

    pub fn clock(&self) -> FrameClock {
        FrameClock::new(self.fps).expect("validated fps")
    }

    pub fn class_ids(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.objects.iter().map(|o| o.class_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: WorldSpec = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WorldSpec::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Live objects at `frame_index`, clamped to the image. Objects that
    /// leave the image or shrink below one pixel are omitted.
    pub fn ground_truth_at(&self, frame_index: usize) -> Result<GroundTruthFrame> {
        if frame_index >= self.duration_frames {
            return Err(Error::FrameOutOfRange {
                index: frame_index,
                len: self.duration_frames,
            });
        }
        let boxes = self
            .objects
            .iter()
            .filter_map(|o| {
                let [x1, y1, x2, y2] = o.position_at(frame_index)?;
                BBox::new(x1, y1, x2, y2, o.class_id)
                    .ok()?
                    .with_track(o.track_id)
                    .clamped(self.image_width, self.image_height)
            })
            .collect();
        Ok(GroundTruthFrame {
            frame_index,
            boxes,
            image_width: self.image_width,
            image_height: self.image_height,
        })
    }
}

/// Parameters for a randomly populated constant-velocity traffic scene.
/// Every trajectory stays inside the image for the object's lifetime, so
/// ground truth is never clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficScenario {
    pub duration_frames: usize,
    pub num_objects: usize,
    /// Largest per-axis horizontal speed, pixels per frame.
    pub max_speed: f64,
    #[serde(default = "default_min_width")]
    pub min_width: f64,
    #[serde(default = "default_max_width")]
    pub max_width: f64,
    #[serde(default = "default_num_classes")]
    pub num_classes: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_min_width() -> f64 {
    16.0
}

fn default_max_width() -> f64 {
    320.0
}

fn default_num_classes() -> u32 {
    3
}

impl TrafficScenario {
    pub fn generate(&self, seed: u64) -> Result<WorldSpec> {
        let sane_widths =
            self.min_width >= 2.0 && self.max_width >= self.min_width && self.max_width <= 960.0;
        if !(self.max_speed >= 0.0 && sane_widths && self.duration_frames >= 4) {
            return Err(Error::InvalidWorld(format!(
                "invalid traffic scenario {self:?}"
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidWorld("num_classes must be positive".into()));
        }
        let seed = self.seed.unwrap_or(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (img_w, img_h) = (1920.0, 1080.0);
        let duration = self.duration_frames;
        let mut objects = Vec::with_capacity(self.num_objects);
        for id in 0..self.num_objects {
            // log-uniform widths cover small, medium and large objects
            let (lo, hi) = (self.min_width.ln(), self.max_width.ln());
            let w = rng.random_range(lo..=hi).exp();
            let h = (w * rng.random_range(0.5..1.2)).min(img_h / 2.0);
            let spawn = if id % 3 == 0 {
                0
            } else {
                rng.random_range(0..duration - 3)
            };
            let life = duration - spawn;
            let mut end = if id % 4 == 3 && life >= 8 {
                spawn + rng.random_range(life / 2..life)
            } else {
                duration
            };
            let mut vx = rng.random_range(-self.max_speed..=self.max_speed);
            let mut vy = rng.random_range(-self.max_speed..=self.max_speed) * 0.25;
            // fast objects cross the image and leave; the path never clips
            let room_x = img_w - w - 2.0;
            let room_y = img_h - h - 2.0;
            let fits = |v: f64, room: f64| {
                if v == 0.0 {
                    usize::MAX
                } else {
                    (room / v.abs()).floor() as usize
                }
            };
            end = end.min(
                spawn
                    .saturating_add(fits(vx, room_x).min(fits(vy, room_y)))
                    .max(spawn + 4),
            );
            let frames = (end - spawn) as f64;
            if vx.abs() * frames > room_x {
                vx = vx.signum() * room_x / frames;
            }
            if vy.abs() * frames > room_y {
                vy = vy.signum() * room_y / frames;
            }
            let despawn = (end < duration).then_some(end);
            let span_x = (room_x - vx.abs() * frames).max(0.0);
            let span_y = (room_y - vy.abs() * frames).max(0.0);
            let x0 =
                1.0 + rng.random_range(0.0..=span_x) + if vx < 0.0 { -vx * frames } else { 0.0 };
            let y0 =
                1.0 + rng.random_range(0.0..=span_y) + if vy < 0.0 { -vy * frames } else { 0.0 };
            objects.push(ObjectTrack {
                track_id: id as i64,
                class_id: (id as u32) % self.num_classes,
                initial: [x0, y0, x0 + w, y0 + h],
                velocity: [vx, vy],
                acceleration: None,
                spawn_frame: spawn,
                despawn_frame: despawn,
            });
        }
        let mut world = WorldSpec::new(duration, objects)?;
        world.seed = seed;
        Ok(world)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    Oracle,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub kind: ObserverKind,
    #[serde(default)]
    pub position_noise_std: f64,
    #[serde(default)]
    pub miss_prob: f64,
    /// Mean false positives per frame.
    #[serde(default)]
    pub false_positive_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ObserverSpec {
    pub fn oracle() -> Self {
        ObserverSpec {
            kind: ObserverKind::Oracle,
            position_noise_std: 0.0,
            miss_prob: 0.0,
            false_positive_rate: 0.0,
            seed: 0,
        }
    }

    pub fn noisy(
        position_noise_std: f64,
        miss_prob: f64,
        false_positive_rate: f64,
        seed: u64,
    ) -> Self {
        ObserverSpec {
            kind: ObserverKind::Noisy,
            position_noise_std,
            miss_prob,
            false_positive_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position_noise_std.is_finite() && self.position_noise_std >= 0.0) {
            return Err(Error::InvalidObserver(format!(
                "position_noise_std = {}",
                self.position_noise_std
            )));
        }
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return Err(Error::InvalidObserver(format!(
                "miss_prob = {}",
                self.miss_prob
            )));
        }
        if !(self.false_positive_rate.is_finite() && self.false_positive_rate >= 0.0) {
            return Err(Error::InvalidObserver(format!(
                "false_positive_rate = {}",
                self.false_positive_rate
            )));
        }
        Ok(())
    }
}

/// Pixel scale of the displacement-to-confidence mapping for noisy detections.
const SCORE_SCALE_PX: f64 = 8.0;

/// Simulated detector output for one frame.
///
/// The noisy observer draws from a ChaCha stream keyed by `(seed, frame)`.
/// Kept detections score `8 / (8 + rms_shift_px)`, so exact boxes score 1.0;
/// false positives score uniformly in `[0.05, 0.6]` and carry fresh negative
/// track ids.
pub fn observe(
    world: &WorldSpec,
    frame_index: usize,
    observer: &ObserverSpec,
) -> Result<FeatureSnapshot> {
    let truth = world.ground_truth_at(frame_index)?;
    let clock = world.clock();
    let boxes = match observer.kind {
        ObserverKind::Oracle => truth.boxes,
        ObserverKind::Noisy => {
            observer.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(observer.seed);
            rng.set_stream(frame_index as u64);
            let noise = Normal::new(0.0, observer.position_noise_std)
                .map_err(|e| Error::InvalidObserver(e.to_string()))?;
            let mut out = Vec::with_capacity(truth.boxes.len());
            for b in &truth.boxes {
                let missed = rng.random::<f64>() < observer.miss_prob;
                let shift: [f64; 4] = std::array::from_fn(|_| noise.sample(&mut rng));
                if missed {
                    continue;
                }
                let c = b.coords();
                let moved = std::array::from_fn(|i| c[i] + shift[i]);
                let rms = (shift.iter().map(|s| s * s).sum::<f64>() / 4.0).sqrt();
                let Some(nb) = b
                    .with_coords(moved)
                    .ok()
                    .and_then(|nb| nb.clamped(world.image_width, world.image_height))
                else {
                    continue;
                };
                out.push(nb.with_score(SCORE_SCALE_PX / (SCORE_SCALE_PX + rms))?);
            }
            if observer.false_positive_rate > 0.0 {
                let classes = world.class_ids();
                let count = Poisson::new(observer.false_positive_rate)
                    .map_err(|e| Error::InvalidObserver(e.to_string()))?
                    .sample(&mut rng) as usize;
                for i in 0..count {
                    let w = rng.random_range(16.0..200.0);
                    let h = w * rng.random_range(0.5..1.5);
                    let x = rng.random_range(0.0..(world.image_width - w).max(1.0));
                    let y = rng.random_range(0.0..(world.image_height - h).max(1.0));
                    let class_id = classes[rng.random_range(0..classes.len())];
                    let score = rng.random_range(0.05..=0.6);
                    let id = -((frame_index as i64) * 10_000 + i as i64 + 1);
                    if let Some(fp) = BBox::new(x, y, x + w, y + h, class_id)?
                        .with_score(score)?
                        .with_track(id)
                        .clamped(world.image_width, world.image_height)
                    {
                        out.push(fp);
                    }
                }
            }
            out
        }
    };
    FeatureSnapshot::new(frame_index, &clock, boxes)
}

/// Greedy one-to-one pairing of `a` and `b` boxes by descending IoU, keeping
/// pairs with IoU at least [`ASSOCIATION_IOU`]. Ties go to the lower `a`
/// index, then the lower `b` index.
pub fn associate_by_iou(a: &[BBox], b: &[BBox]) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ba) in a.iter().enumerate() {
        for (j, bb) in b.iter().enumerate() {
            let v = iou(ba, bb);
            if v >= ASSOCIATION_IOU {
                candidates.push((v, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Linear extrapolation of `current` boxes `forward_steps` frames ahead,
/// using per-frame velocity measured against `past`.
///
/// Boxes are paired by track id; boxes without ids fall back to
/// [`associate_by_iou`] among the id-less boxes. Unpaired boxes, a zero
/// gap and zero steps all leave boxes where they are, as does any forecast
/// that would invert a box.
pub fn extrapolate(
    current: &FeatureSnapshot,
    past: &FeatureSnapshot,
    forward_steps: usize,
) -> Vec<BBox> {
    let gap = current.frame_index().saturating_sub(past.frame_index());
    if gap == 0 || forward_steps == 0 {
        return current.boxes().to_vec();
    }
    let partner = pair_boxes(current.boxes(), past.boxes());
    let scale = forward_steps as f64 / gap as f64;
    current
        .boxes()
        .iter()
        .zip(partner)
        .map(|(cur, p)| match p {
            Some(j) => {
                let c = cur.coords();
                let prev = past.boxes()[j].coords();
                let next = std::array::from_fn(|i| c[i] + (c[i] - prev[i]) * scale);
                cur.with_coords(next).unwrap_or(*cur)
            }
            None => *cur,
        })
        .collect()
}

fn pair_boxes(current: &[BBox], past: &[BBox]) -> Vec<Option<usize>> {
    let by_id: HashMap<i64, usize> = past
        .iter()
        .enumerate()
        .filter_map(|(j, b)| b.track_id().map(|id| (id, j)))
        .collect();
    let mut partner: Vec<Option<usize>> = current
        .iter()
        .map(|b| b.track_id().and_then(|id| by_id.get(&id).copied()))
        .collect();

    let cur_free: Vec<usize> = (0..current.len())
        .filter(|&i| current[i].track_id().is_none())
        .collect();
    if !cur_free.is_empty() {
        let past_free: Vec<usize> = (0..past.len())
            .filter(|&j| past[j].track_id().is_none())
            .collect();
        let a: Vec<BBox> = cur_free.iter().map(|&i| current[i]).collect();
        let b: Vec<BBox> = past_free.iter().map(|&j| past[j]).collect();
        for (i, j) in associate_by_iou(&a, &b) {
            partner[cur_free[i]] = Some(past_free[j]);
        }
    }
    partner
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> WorldSpec {
        let mut fast =
            ObjectTrack::constant_velocity(1, 0, [100.0, 100.0, 200.0, 180.0], [3.0, 0.0]);
        fast.despawn_frame = Some(20);
        let late = ObjectTrack {
            spawn_frame: 5,
            ..ObjectTrack::constant_velocity(2, 1, [500.0, 400.0, 540.0, 430.0], [-1.5, 0.5])
        };
        let accel = ObjectTrack {
            acceleration: Some([0.2, 0.0]),
            ..ObjectTrack::constant_velocity(3, 2, [800.0, 600.0, 900.0, 700.0], [1.0, 0.0])
        };
        WorldSpec::new(40, vec![fast, late, accel]).unwrap()
    }

    fn gt_box(w: &WorldSpec, frame: usize, id: i64) -> Option<BBox> {
        w.ground_truth_at(frame)
            .unwrap()
            .boxes
            .into_iter()
            .find(|b| b.track_id() == Some(id))
    }

    #[test]
    fn ground_truth_motion() {
        let w = world();
        assert_eq!(
            gt_box(&w, 0, 1).unwrap().coords(),
            [100.0, 100.0, 200.0, 180.0]
        );
        assert_eq!(
            gt_box(&w, 10, 1).unwrap().coords(),
            [130.0, 100.0, 230.0, 180.0]
        );
        assert!(gt_box(&w, 19, 1).is_some());
        assert!(gt_box(&w, 20, 1).is_none());
        assert!(gt_box(&w, 4, 2).is_none());
        assert_eq!(
            gt_box(&w, 5, 2).unwrap().coords(),
            [500.0, 400.0, 540.0, 430.0]
        );
        // 1*4 + 0.5*0.2*16
        assert!((gt_box(&w, 4, 3).unwrap().x1() - 805.6).abs() < 1e-12);
        assert!(w.ground_truth_at(40).is_err());
    }

    #[test]
    fn ground_truth_clamps_and_drops() {
        let leaving =
            ObjectTrack::constant_velocity(0, 0, [1800.0, 10.0, 1900.0, 60.0], [50.0, 0.0]);
        let w = WorldSpec::new(10, vec![leaving]).unwrap();
        assert_eq!(
            gt_box(&w, 1, 0).unwrap().coords(),
            [1850.0, 10.0, 1920.0, 60.0]
        );
        assert!(gt_box(&w, 3, 0).is_none());
    }

    #[test]
    fn world_validation() {
        assert!(WorldSpec::new(1, world().objects).is_err());
        assert!(WorldSpec::new(10, vec![]).is_err());
        let bad = ObjectTrack::constant_velocity(0, 0, [10.0, 10.0, 10.0, 20.0], [0.0, 0.0]);
        assert!(WorldSpec::new(10, vec![bad]).is_err());
        let mut dup = world().objects;
        dup[1].track_id = 1;
        assert!(WorldSpec::new(10, dup).is_err());
        let mut w = world();
        w.objects[0].despawn_frame = Some(0);
        assert!(w.validate().is_err());
    }

    #[test]
    fn world_json_round_trip() {
        let w = world();
        let text = serde_json::to_string(&w).unwrap();
        let back = WorldSpec::from_json(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.digest(), w.digest());
        let mut other = w.clone();
        other.objects[0].velocity[0] = 3.5;
        assert_ne!(other.digest(), w.digest());
    }

    #[test]
    fn oracle_and_noiseless_observers_match_truth() {
        let w = world();
        for f in [0, 7, 25] {
            let truth = w.ground_truth_at(f).unwrap().boxes;
            assert_eq!(
                observe(&w, f, &ObserverSpec::oracle()).unwrap().boxes(),
                &truth[..]
            );
            let quiet = ObserverSpec::noisy(0.0, 0.0, 0.0, 9);
            assert_eq!(observe(&w, f, &quiet).unwrap().boxes(), &truth[..]);
        }
    }

    #[test]
    fn noisy_observer_is_deterministic_and_perturbs() {
        let w = world();
        let obs = ObserverSpec::noisy(2.0, 0.0, 2.0, 4);
        let a = observe(&w, 12, &obs).unwrap();
        let b = observe(&w, 12, &obs).unwrap();
        assert_eq!(a, b);
        let truth = w.ground_truth_at(12).unwrap().boxes;
        let a1 = a.boxes().iter().find(|b| b.track_id() == Some(1)).unwrap();
        assert_ne!(a1.coords(), truth[0].coords());
        assert!(a1.score() < 1.0);
        assert!(a
            .boxes()
            .iter()
            .filter(|b| b.track_id().unwrap() < 0)
            .all(|b| b.score() <= 0.6));
        let other = ObserverSpec { seed: 5, ..obs };
        assert_ne!(observe(&w, 12, &other).unwrap(), a);
    }

    #[test]
    fn everything_missed() {
        let w = world();
        let blind = ObserverSpec::noisy(1.0, 1.0, 0.0, 1);
        assert!(observe(&w, 8, &blind).unwrap().boxes().is_empty());
        assert!(ObserverSpec::noisy(1.0, 1.5, 0.0, 1).validate().is_err());
        assert!(ObserverSpec::noisy(-1.0, 0.0, 0.0, 1).validate().is_err());
    }

    #[test]
    fn extrapolation_identity_cases() {
        let w = world();
        let o = ObserverSpec::oracle();
        let cur = observe(&w, 10, &o).unwrap();
        let past = observe(&w, 8, &o).unwrap();
        assert_eq!(extrapolate(&cur, &past, 0), cur.boxes());
        assert_eq!(extrapolate(&cur, &cur, 3), cur.boxes());
    }

    #[test]
    fn extrapolation_reaches_future_truth() {
        let w = world();
        let o = ObserverSpec::oracle();
        for gap in 1..=4 {
            let cur = observe(&w, 12, &o).unwrap();
            let past = observe(&w, 12 - gap, &o).unwrap();
            let out = extrapolate(&cur, &past, gap);
            let fast = out.iter().find(|b| b.track_id() == Some(1)).unwrap();
            let truth = gt_box(&w, 12 + gap, 1).unwrap();
            for (a, b) in fast.coords().iter().zip(truth.coords()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn newborn_objects_stay_put() {
        let w = world();
        let o = ObserverSpec::oracle();
        let cur = observe(&w, 6, &o).unwrap();
        let past = observe(&w, 3, &o).unwrap();
        let out = extrapolate(&cur, &past, 3);
        let late = out.iter().find(|b| b.track_id() == Some(2)).unwrap();
        assert_eq!(late.coords(), gt_box(&w, 6, 2).unwrap().coords());
    }

    #[test]
    fn id_free_boxes_use_iou_fallback() {
        let clock = FrameClock::new(30.0).unwrap();
        let p = BBox::new(0.0, 0.0, 100.0, 100.0, 0).unwrap();
        let c = p.translated(10.0, 0.0).unwrap();
        let past = FeatureSnapshot::new(0, &clock, vec![p]).unwrap();
        let cur = FeatureSnapshot::new(1, &clock, vec![c]).unwrap();
        let out = extrapolate(&cur, &past, 2);
        assert_eq!(out[0].coords(), [30.0, 0.0, 130.0, 100.0]);
    }

    #[test]
    fn association_rules() {
        let a = vec![
            BBox::new(0.0, 0.0, 10.0, 10.0, 0).unwrap(),
            BBox::new(50.0, 50.0, 60.0, 60.0, 0).unwrap(),
        ];
        assert_eq!(associate_by_iou(&a, &a), vec![(0, 0), (1, 1)]);
        let far = vec![BBox::new(500.0, 500.0, 510.0, 510.0, 0).unwrap()];
        assert!(associate_by_iou(&a, &far).is_empty());
        // b0 and b1 overlap a0 equally; the lower b index wins
        let one = vec![BBox::new(0.0, 0.0, 10.0, 10.0, 0).unwrap()];
        let twins = vec![
            BBox::new(2.0, 0.0, 12.0, 10.0, 0).unwrap(),
            BBox::new(-2.0, 0.0, 8.0, 10.0, 0).unwrap(),
        ];
        assert_eq!(associate_by_iou(&one, &twins), vec![(0, 0)]);
    }

    #[test]
    fn generated_traffic_stays_inside() {
        let scenario = TrafficScenario {
            duration_frames: 300,
            num_objects: 20,
            max_speed: 6.0,
            min_width: 16.0,
            max_width: 320.0,
            num_classes: 3,
            seed: None,
        };
        for (speed, seed) in [(6.0, 7), (40.0, 8), (0.0, 9)] {
            let scenario = TrafficScenario {
                max_speed: speed,
                ..scenario.clone()
            };
            let w = scenario.generate(seed).unwrap();
            assert_eq!(w, scenario.generate(seed).unwrap());
            for o in &w.objects {
                assert!(o.despawn_frame.unwrap_or(w.duration_frames) >= o.spawn_frame + 4);
                for f in [
                    o.spawn_frame,
                    o.despawn_frame.unwrap_or(w.duration_frames) - 1,
                ] {
                    let [x1, y1, x2, y2] = o.position_at(f).unwrap();
                    assert!(x1 >= 0.0 && y1 >= 0.0 && x2 <= w.image_width && y2 <= w.image_height);
                }
            }
        }
    }
}
