//! Test-only reference implementations, written independently of the crate.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamsim::BBox;

pub fn iou_ref(a: [f64; 4], b: [f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

/// Brute-force AP: every rank prefix is re-matched from scratch and the
/// interpolated precision at recall level r/100 is the best precision over
/// prefixes with `100 * tp >= r * npos`, compared in integers.
pub fn oracle_ap(preds: &[Vec<BBox>], truths: &[Vec<BBox>], thr: f64) -> Option<f64> {
    let mut classes: Vec<u32> = truths.iter().flatten().map(|b| b.class_id()).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &c in &classes {
        let mut dets: Vec<(usize, usize, &BBox)> = Vec::new();
        for (img, boxes) in preds.iter().enumerate() {
            for (i, b) in boxes.iter().enumerate() {
                if b.class_id() == c {
                    dets.push((img, i, b));
                }
            }
        }
        dets.sort_by(|x, y| {
            y.2.score()
                .partial_cmp(&x.2.score())
                .unwrap()
                .then(x.0.cmp(&y.0))
                .then(x.1.cmp(&y.1))
        });
        let npos = truths
            .iter()
            .flatten()
            .filter(|b| b.class_id() == c)
            .count();
        let mut points: Vec<(usize, f64)> = Vec::new();
        for k in 1..=dets.len() {
            let mut used: Vec<Vec<bool>> = truths.iter().map(|t| vec![false; t.len()]).collect();
            let mut tp = 0;
            for &(img, _, d) in &dets[..k] {
                let mut best: Option<(usize, f64)> = None;
                for (g, t) in truths.get(img).into_iter().flatten().enumerate() {
                    if t.class_id() != c || used[img][g] {
                        continue;
                    }
                    let v = iou_ref(d.coords(), t.coords());
                    if v >= thr && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((g, v));
                    }
                }
                if let Some((g, _)) = best {
                    used[img][g] = true;
                    tp += 1;
                }
            }
            points.push((tp, tp as f64 / k as f64));
        }
        let mut ap = 0.0;
        for r in 0..=100usize {
            let p = points
                .iter()
                .filter(|(tp, _)| 100 * tp >= r * npos)
                .map(|&(_, p)| p)
                .fold(0.0, f64::max);
            ap += p;
        }
        sum += ap / 101.0;
    }
    Some(sum / classes.len() as f64)
}

/// A random AP instance on a coarse grid so that overlaps, score ties and
/// IoU ties are common. At most 10 images, 20 boxes per image, 3 classes.
pub fn random_instance(seed: u64) -> (Vec<Vec<BBox>>, Vec<Vec<BBox>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = rng.random_range(1..=10);
    let classes = rng.random_range(1..=3u32);
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let grid_box = |rng: &mut ChaCha8Rng, class: u32| {
        let x = 5.0 * rng.random_range(0..16) as f64;
        let y = 5.0 * rng.random_range(0..16) as f64;
        let w = 5.0 * rng.random_range(1..8) as f64;
        let h = 5.0 * rng.random_range(1..8) as f64;
        BBox::new(x, y, x + w, y + h, class).unwrap()
    };
    for _ in 0..images {
        let n_gt = rng.random_range(0..=10);
        let gt: Vec<BBox> = (0..n_gt)
            .map(|_| {
                let c = rng.random_range(0..classes);
                grid_box(&mut rng, c)
            })
            .collect();
        let n_pred = rng.random_range(0..=(20 - n_gt));
        let pred: Vec<BBox> = (0..n_pred)
            .map(|_| {
                let score = rng.random_range(1..=10) as f64 / 10.0;
                let b = if !gt.is_empty() && rng.random_bool(0.6) {
                    let t = gt[rng.random_range(0..gt.len())];
                    let dx = rng.random_range(-2..=2) as f64 * 2.5;
                    let dy = rng.random_range(-2..=2) as f64 * 2.5;
                    let c = if rng.random_bool(0.9) {
                        t.class_id()
                    } else {
                        rng.random_range(0..classes)
                    };
                    let [x1, y1, x2, y2] = t.coords();
                    BBox::new(x1 + dx, y1 + dy, x2 + dx, y2 + dy, c).unwrap()
                } else {
                    let c = rng.random_range(0..classes);
                    grid_box(&mut rng, c)
                };
                b.with_score(score).unwrap()
            })
            .collect();
        truths.push(gt);
        preds.push(pred);
    }
    (preds, truths)
}
