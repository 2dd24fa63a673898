//! COCO-style average precision over a set of images.
//!
//! Detections of one class are ranked by descending score (ties keep image
//! order, then insertion order), each is greedily matched to the unmatched
//! ground-truth box of its image with the highest IoU at or above the
//! threshold, and the resulting precision/recall curve is sampled at 101
//! recall points after taking its monotone envelope.
//!
//! With a size filter, ground truth outside the size class is "ignored":
//! detections that match it are dropped rather than counted, as are
//! unmatched detections outside the class.

use std::collections::BTreeSet;

use crate::types::{iou, BBox, SizeClass};

pub const RECALL_POINTS: usize = 101;

/// IoU thresholds 0.50:0.05:0.95.
pub const COCO_IOU_THRESHOLDS: [f64; 10] =
    [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RankedDetection {
    pub image: usize,
    pub outcome: Outcome,
}

/// AP at one IoU threshold, averaged over classes that have ground truth.
/// `None` when no image holds any (non-ignored) ground truth.
pub fn average_precision(
    predictions: &[Vec<BBox>],
    truths: &[Vec<BBox>],
    iou_threshold: f64,
) -> Option<f64> {
    average_precision_filtered(predictions, truths, iou_threshold, None)
}

/// Like [`average_precision`], restricted to one object-size class.
pub fn average_precision_filtered(
    predictions: &[Vec<BBox>],
    truths: &[Vec<BBox>],
    iou_threshold: f64,
    size: Option<SizeClass>,
) -> Option<f64> {
    let per_class: Vec<f64> = classes_with_truth(truths, size)
        .into_iter()
        .map(|class| {
            let (ranked, npos) = match_class(predictions, truths, class, iou_threshold, size);
            interpolated_ap(&ranked, npos)
        })
        .collect();
    if per_class.is_empty() {
        return None;
    }
    Some(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

pub(crate) fn classes_with_truth(truths: &[Vec<BBox>], size: Option<SizeClass>) -> BTreeSet<u32> {
    truths
        .iter()
        .flatten()
        .filter(|b| size.is_none_or(|s| b.size_class() == s))
        .map(BBox::class_id)
        .collect()
}

/// Ranks and matches the detections of one class. Returns the outcome of
/// each detection in rank order and the number of non-ignored truths.
pub(crate) fn match_class(
    predictions: &[Vec<BBox>],
    truths: &[Vec<BBox>],
    class: u32,
    iou_threshold: f64,
    size: Option<SizeClass>,
) -> (Vec<RankedDetection>, usize) {
    let mut dets: Vec<(usize, &BBox)> = predictions
        .iter()
        .enumerate()
        .flat_map(|(img, boxes)| boxes.iter().map(move |b| (img, b)))
        .filter(|(_, b)| b.class_id() == class)
        .collect();
    // stable: equal scores keep (image, insertion) order
    dets.sort_by(|a, b| b.1.score().total_cmp(&a.1.score()));

    let gts: Vec<Vec<(&BBox, bool)>> = truths
        .iter()
        .map(|boxes| {
            boxes
                .iter()
                .filter(|b| b.class_id() == class)
                .map(|b| (b, size.is_some_and(|s| b.size_class() != s)))
                .collect()
        })
        .collect();
    let npos = gts.iter().flatten().filter(|(_, ignored)| !ignored).count();
    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();

    let ranked = dets
        .into_iter()
        .map(|(img, det)| {
            let candidates = gts.get(img).map(Vec::as_slice).unwrap_or(&[]);
            let free = taken.get(img).map(Vec::as_slice).unwrap_or(&[]);
            let outcome = if let Some(g) = best_match(det, candidates, free, false, iou_threshold) {
                taken[img][g] = true;
                Outcome::TruePositive
            } else if let Some(g) = best_match(det, candidates, free, true, iou_threshold) {
                taken[img][g] = true;
                Outcome::Ignored
            } else if size.is_some_and(|s| det.size_class() != s) {
                Outcome::Ignored
            } else {
                Outcome::FalsePositive
            };
            RankedDetection {
                image: img,
                outcome,
            }
        })
        .collect();
    (ranked, npos)
}

/// Untaken truth with the highest IoU at or above the threshold; the lowest
/// index wins ties.
fn best_match(
    det: &BBox,
    candidates: &[(&BBox, bool)],
    taken: &[bool],
    want_ignored: bool,
    iou_threshold: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (g, (truth, ignored)) in candidates.iter().enumerate() {
        if *ignored != want_ignored || taken[g] {
            continue;
        }
        let v = iou(det, truth);
        if v >= iou_threshold && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((g, v));
        }
    }
    best.map(|(g, _)| g)
}

/// 101-point interpolated AP of a ranked outcome list.
pub(crate) fn interpolated_ap(ranked: &[RankedDetection], npos: usize) -> f64 {
    if npos == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    for d in ranked {
        match d.outcome {
            Outcome::TruePositive => tp += 1,
            Outcome::FalsePositive => fp += 1,
            Outcome::Ignored => continue,
        }
        recall.push(tp as f64 / npos as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let total: f64 = (0..RECALL_POINTS)
        .map(|r| {
            let level = r as f64 / (RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&rc| rc < level);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / RECALL_POINTS as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, class: u32, score: f64) -> BBox {
        BBox::new(x, 0.0, x + 10.0, 10.0, class)
            .unwrap()
            .with_score(score)
            .unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = vec![vec![b(0.0, 0, 1.0)]];
        assert_eq!(average_precision(&gt, &gt, 0.5), Some(1.0));
    }

    #[test]
    fn no_predictions() {
        let gt = vec![vec![b(0.0, 0, 1.0)], vec![b(20.0, 1, 1.0)]];
        assert_eq!(average_precision(&[vec![], vec![]], &gt, 0.5), Some(0.0));
        // predictions list shorter than truths is treated as empty images
        assert_eq!(average_precision(&[], &gt, 0.5), Some(0.0));
    }

    #[test]
    fn no_truth_is_undefined() {
        assert_eq!(
            average_precision(&[vec![b(0.0, 0, 0.9)]], &[vec![]], 0.5),
            None
        );
    }

    #[test]
    fn half_recall() {
        // one of two truths found, no false positives: precision 1 up to recall 0.5
        let gt = vec![vec![b(0.0, 0, 1.0), b(50.0, 0, 1.0)]];
        let pred = vec![vec![b(0.0, 0, 0.9)]];
        let ap = average_precision(&pred, &gt, 0.5).unwrap();
        assert!((ap - 51.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn false_positive_ranked_first() {
        // FP at rank 1, TP at rank 2: precision 0.5 for all recall levels
        let gt = vec![vec![b(0.0, 0, 1.0)]];
        let pred = vec![vec![b(100.0, 0, 0.9), b(0.0, 0, 0.8)]];
        assert!((average_precision(&pred, &gt, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn classes_are_averaged() {
        let gt = vec![vec![b(0.0, 0, 1.0), b(50.0, 1, 1.0)]];
        let pred = vec![vec![b(0.0, 0, 1.0)]];
        assert!((average_precision(&pred, &gt, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_inclusive() {
        // IoU exactly 1/3
        let gt = vec![vec![BBox::new(0.0, 0.0, 10.0, 10.0, 0).unwrap()]];
        let pred = vec![vec![BBox::new(5.0, 0.0, 15.0, 10.0, 0).unwrap()]];
        assert_eq!(average_precision(&pred, &gt, 1.0 / 3.0), Some(1.0));
        assert_eq!(average_precision(&pred, &gt, 0.34), Some(0.0));
    }

    #[test]
    fn size_filter_ignores_other_sizes() {
        let small = BBox::new(0.0, 0.0, 10.0, 10.0, 0).unwrap();
        let large = BBox::new(100.0, 100.0, 300.0, 300.0, 0).unwrap();
        let gt = vec![vec![small, large]];
        // only the large one is detected, plus a stray small false positive
        let stray = BBox::new(500.0, 500.0, 510.0, 510.0, 0)
            .unwrap()
            .with_score(0.99)
            .unwrap();
        let pred = vec![vec![stray, large.with_score(0.9).unwrap()]];
        assert_eq!(
            average_precision_filtered(&pred, &gt, 0.5, Some(SizeClass::Large)),
            Some(1.0)
        );
        assert_eq!(
            average_precision_filtered(&pred, &gt, 0.5, Some(SizeClass::Small)),
            Some(0.0)
        );
        assert_eq!(
            average_precision_filtered(&pred, &gt, 0.5, Some(SizeClass::Medium)),
            None
        );
        // unfiltered, the stray outranks the hit
        let ap = average_precision(&pred, &gt, 0.5).unwrap();
        assert!((ap - 0.5 * 51.0 / 101.0).abs() < 1e-12);
    }
}
