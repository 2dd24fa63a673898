//! COCO-format ground truth, so logged runs can be scored against real
//! annotations instead of a synthetic world.
//!
//! Images become frames in ascending `id` order; the frame rate is declared
//! by the caller since COCO carries no timing.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streameval::GroundTruthSource;
use crate::types::{BBox, FrameClock, GroundTruthFrame};
use crate::worldsim::WorldSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub file_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    /// `[x, y, width, height]`
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: Option<f64>,
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

impl CocoDataset {
    /// Exports the ground truth of every frame; image ids are `frame + 1`.
    pub fn from_world(world: &WorldSpec) -> Result<Self> {
        let mut images = Vec::with_capacity(world.duration_frames);
        let mut annotations = Vec::new();
        for k in 0..world.duration_frames {
            let frame = world.ground_truth_at(k)?;
            let image_id = k as u64 + 1;
            images.push(CocoImage {
                id: image_id,
                width: world.image_width,
                height: world.image_height,
                file_name: format!("{k:06}.jpg"),
            });
            for b in frame.boxes {
                annotations.push(CocoAnnotation {
                    id: annotations.len() as u64 + 1,
                    image_id,
                    category_id: b.class_id(),
                    bbox: [b.x1(), b.y1(), b.width(), b.height()],
                    area: Some(b.area()),
                    iscrowd: 0,
                    track_id: b.track_id(),
                });
            }
        }
        let categories = world
            .class_ids()
            .into_iter()
            .map(|id| CocoCategory {
                id,
                name: format!("class_{id}"),
            })
            .collect();
        Ok(CocoDataset {
            images,
            annotations,
            categories,
        })
    }
}

/// Ground truth parsed from a COCO annotation file.
#[derive(Debug, Clone)]
pub struct CocoGroundTruth {
    clock: FrameClock,
    frames: Vec<GroundTruthFrame>,
}

impl CocoGroundTruth {
    pub fn new(dataset: &CocoDataset, fps: f64) -> Result<Self> {
        let clock = FrameClock::new(fps)?;
        let mut by_image: BTreeMap<u64, &CocoImage> = BTreeMap::new();
        for img in &dataset.images {
            if by_image.insert(img.id, img).is_some() {
                return Err(Error::Coco(format!("duplicate image id {}", img.id)));
            }
        }
        let position: HashMap<u64, usize> = by_image
            .keys()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut frames: Vec<GroundTruthFrame> = by_image
            .values()
            .enumerate()
            .map(|(i, img)| GroundTruthFrame {
                frame_index: i,
                boxes: Vec::new(),
                image_width: img.width,
                image_height: img.height,
            })
            .collect();
        for ann in &dataset.annotations {
            let &slot = position.get(&ann.image_id).ok_or_else(|| {
                Error::Coco(format!(
                    "annotation {} refers to unknown image {}",
                    ann.id, ann.image_id
                ))
            })?;
            let [x, y, w, h] = ann.bbox;
            let b = BBox::from_xywh(x, y, w, h, ann.category_id)
                .map_err(|e| Error::Coco(format!("annotation {}: {e}", ann.id)))?;
            frames[slot].boxes.push(match ann.track_id {
                Some(id) => b.with_track(id),
                None => b,
            });
        }
        Ok(CocoGroundTruth { clock, frames })
    }

    pub fn from_json(text: &str, fps: f64) -> Result<Self> {
        let dataset: CocoDataset = serde_json::from_str(text)?;
        CocoGroundTruth::new(&dataset, fps)
    }

    pub fn load(path: impl AsRef<Path>, fps: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CocoGroundTruth::from_json(&text, fps)
    }

    pub fn frames(&self) -> &[GroundTruthFrame] {
        &self.frames
    }
}

impl GroundTruthSource for CocoGroundTruth {
    fn fps(&self) -> f64 {
        self.clock.fps()
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<GroundTruthFrame> {
        self.frames
            .get(index)
            .cloned()
            .ok_or(Error::FrameOutOfRange {
                index,
                len: self.frames.len(),
            })
    }

    fn digest(&self) -> Option<String> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "images": [
            {"id": 20, "width": 1920, "height": 1080, "file_name": "b.jpg"},
            {"id": 10, "width": 1920, "height": 1080, "file_name": "a.jpg"}
        ],
        "annotations": [
            {"id": 1, "image_id": 20, "category_id": 2, "bbox": [10, 20, 30, 40], "area": 1200, "iscrowd": 0},
            {"id": 2, "image_id": 10, "category_id": 1, "bbox": [0, 0, 5, 5]}
        ],
        "categories": [{"id": 1, "name": "car"}, {"id": 2, "name": "person"}]
    }"#;

    #[test]
    fn frames_follow_image_id_order() {
        let gt = CocoGroundTruth::from_json(SAMPLE, 30.0).unwrap();
        assert_eq!(gt.frame_count(), 2);
        let first = gt.frame(0).unwrap();
        assert_eq!(first.boxes[0].class_id(), 1);
        let second = gt.frame(1).unwrap();
        assert_eq!(second.boxes[0].coords(), [10.0, 20.0, 40.0, 60.0]);
        assert!(gt.frame(2).is_err());
    }

    #[test]
    fn bad_annotations_rejected() {
        let unknown = SAMPLE.replace("\"image_id\": 10", "\"image_id\": 99");
        assert!(CocoGroundTruth::from_json(&unknown, 30.0).is_err());
        let flat = SAMPLE.replace("[0, 0, 5, 5]", "[0, 0, 0, 5]");
        assert!(CocoGroundTruth::from_json(&flat, 30.0).is_err());
        assert!(CocoGroundTruth::from_json(SAMPLE, -1.0).is_err());
    }
}
