//! Heuristic refinement of raw prompted-detector boxes: a frame-relative
//! size filter followed by greedy non-maximum suppression.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{aabb_iou, Aabb, Mask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
}

/// Which box quantity the size filter compares against the frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    /// box area / frame area
    #[default]
    Area,
    /// both box.w / frame_w and box.h / frame_h inside the bounds
    SideLength,
    /// box.w / box.h (the band is then an absolute aspect ratio)
    Aspect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub area_ratio_lo: f64,
    pub area_ratio_hi: f64,
    pub nms_iou_threshold: f64,
    pub score_floor: f64,
    pub size_rule: SizeRule,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            area_ratio_lo: 0.025,
            area_ratio_hi: 0.075,
            nms_iou_threshold: 0.5,
            score_floor: 0.0,
            size_rule: SizeRule::Area,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let (lo, hi) = (self.area_ratio_lo, self.area_ratio_hi);
        if !(0.0 <= lo && lo < hi && (hi <= 1.0 || self.size_rule == SizeRule::Aspect)) {
            return Err(RefineError::InvalidConfig(format!("need 0 <= lo < hi <= 1, got {lo}..{hi}")));
        }
        if !(self.nms_iou_threshold > 0.0 && self.nms_iou_threshold < 1.0) {
            return Err(RefineError::InvalidConfig(format!(
                "nms threshold must be in (0, 1), got {}",
                self.nms_iou_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.score_floor) {
            return Err(RefineError::InvalidConfig(format!("score floor {} outside [0, 1]", self.score_floor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub frame_id: String,
    pub bbox: Aabb,
    pub score: f64,
    pub mask: Option<Mask>,
    pub track_id: Option<String>,
}

impl Detection {
    pub fn new(frame_id: impl Into<String>, bbox: Aabb, score: f64) -> Self {
        Self { frame_id: frame_id.into(), bbox, score, mask: None, track_id: None }
    }
}

pub fn area_ratio_filter(dets: &[Detection], frame_w: u32, frame_h: u32, cfg: &RefineConfig) -> Vec<Detection> {
    let (fw, fh) = (frame_w as f64, frame_h as f64);
    let inside = |r: f64| cfg.area_ratio_lo <= r && r <= cfg.area_ratio_hi;
    dets.iter()
        .filter(|d| match cfg.size_rule {
            SizeRule::Area => inside(d.bbox.area() / (fw * fh)),
            SizeRule::SideLength => inside(d.bbox.w / fw) && inside(d.bbox.h / fh),
            SizeRule::Aspect => inside(d.bbox.w / d.bbox.h),
        })
        .cloned()
        .collect()
}

fn nms_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.x.total_cmp(&b.bbox.x))
        .then(a.bbox.y.total_cmp(&b.bbox.y))
}

/// Greedy NMS. Survivors are returned in their original input order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| nms_order(&dets[i], &dets[j]).then(i.cmp(&j)));
    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && aabb_iou(&dets[i].bbox, &dets[j].bbox) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| dets[i].clone()).collect()
}

/// Size filter, then NMS, then the score floor.
pub fn refine(dets: &[Detection], frame_w: u32, frame_h: u32, cfg: &RefineConfig) -> Vec<Detection> {
    let sized = area_ratio_filter(dets, frame_w, frame_h, cfg);
    let kept = nms(&sized, cfg.nms_iou_threshold);
    kept.into_iter().filter(|d| d.score >= cfg.score_floor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(x: f64, y: f64, w: f64, h: f64, score: f64) -> Detection {
        Detection::new("f", Aabb::new(x, y, w, h).unwrap(), score)
    }

    #[test]
    fn area_ratio_thresholds() {
        let cfg = RefineConfig::default();
        let dets = vec![
            det(0.0, 0.0, 100.0, 100.0, 1.0),
            det(0.0, 0.0, 200.0, 200.0, 1.0),
            det(0.0, 0.0, 300.0, 300.0, 1.0),
        ];
        let kept = area_ratio_filter(&dets, 1000, 1000, &cfg);
        assert_eq!(kept, vec![dets[1].clone()]);
    }

    #[test]
    fn area_ratio_closed_interval() {
        let cfg = RefineConfig::default();
        // 250x100 = 2.5% and 750x100 = 7.5% of a 1000x1000 frame
        let dets = vec![det(0.0, 0.0, 250.0, 100.0, 1.0), det(0.0, 0.0, 750.0, 100.0, 1.0)];
        assert_eq!(area_ratio_filter(&dets, 1000, 1000, &cfg).len(), 2);
    }

    #[test]
    fn side_length_and_aspect_rules() {
        let mut cfg = RefineConfig { size_rule: SizeRule::SideLength, ..Default::default() };
        let dets = vec![det(0.0, 0.0, 50.0, 50.0, 1.0), det(0.0, 0.0, 50.0, 10.0, 1.0)];
        assert_eq!(area_ratio_filter(&dets, 1000, 1000, &cfg), vec![dets[0].clone()]);
        cfg.size_rule = SizeRule::Aspect;
        cfg.area_ratio_lo = 1.5;
        cfg.area_ratio_hi = 6.0;
        assert_eq!(area_ratio_filter(&dets, 1000, 1000, &cfg), vec![dets[1].clone()]);
    }

    #[test]
    fn nms_dominant_and_disjoint() {
        let a = det(0.0, 0.0, 10.0, 10.0, 0.9);
        let b = det(0.0, 0.0, 10.0, 9.0, 0.8);
        assert!(aabb_iou(&a.bbox, &b.bbox) > 0.85);
        assert_eq!(nms(&[b.clone(), a.clone()], 0.5), vec![a.clone()]);
        let c = det(50.0, 50.0, 10.0, 10.0, 0.1);
        assert_eq!(nms(&[a.clone(), c.clone()], 0.5).len(), 2);
    }

    #[test]
    fn nms_chain() {
        // A suppresses B; C only overlaps B above threshold, so it survives.
        let a = det(0.0, 0.0, 8.0, 1.0, 0.9);
        let b = det(2.0, 0.0, 8.0, 1.0, 0.8);
        let c = det(4.0, 0.0, 8.0, 1.0, 0.7);
        // A~B: 6/10, B~C: 6/10, A~C: 4/12
        assert!((aabb_iou(&a.bbox, &b.bbox) - 0.6).abs() < 1e-12);
        assert!((aabb_iou(&b.bbox, &c.bbox) - 0.6).abs() < 1e-12);
        assert!(aabb_iou(&a.bbox, &c.bbox) < 0.5);
        assert_eq!(nms(&[a.clone(), b, c.clone()], 0.5), vec![a, c]);
    }

    #[test]
    fn refine_empty_and_single() {
        let cfg = RefineConfig::default();
        assert!(refine(&[], 100, 100, &cfg).is_empty());
        let one = det(10.0, 10.0, 20.0, 20.0, 0.5);
        assert_eq!(refine(std::slice::from_ref(&one), 100, 100, &cfg), vec![one]);
    }

    /// The ten-box scene used by the CLI example too: 3 near-duplicates of
    /// kept boxes, one box too small and one too large.
    pub(crate) fn ten_box_scene() -> Vec<Detection> {
        vec![
            det(0.0, 0.0, 200.0, 200.0, 0.95),
            det(5.0, 5.0, 200.0, 200.0, 0.60),
            det(300.0, 0.0, 200.0, 200.0, 0.90),
            det(300.0, 10.0, 200.0, 190.0, 0.85),
            det(600.0, 0.0, 200.0, 250.0, 0.80),
            det(0.0, 400.0, 250.0, 200.0, 0.70),
            det(10.0, 405.0, 240.0, 200.0, 0.65),
            det(400.0, 400.0, 180.0, 180.0, 0.60),
            det(800.0, 800.0, 50.0, 50.0, 0.99),
            det(100.0, 600.0, 400.0, 300.0, 0.50),
        ]
    }

    #[test]
    fn ten_box_scene_keeps_five() {
        let out = refine(&ten_box_scene(), 1000, 1000, &RefineConfig::default());
        let scores: Vec<f64> = out.iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.95, 0.90, 0.80, 0.70, 0.60]);
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig::default().validate().is_ok());
        let bad = RefineConfig { area_ratio_lo: 0.1, area_ratio_hi: 0.05, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RefineConfig { nms_iou_threshold: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn arb_dets() -> impl Strategy<Value = Vec<Detection>> {
        proptest::collection::vec(
            (0.0f64..80.0, 0.0f64..80.0, 5.0f64..40.0, 5.0f64..40.0, 0.0f64..1.0),
            0..25,
        )
        .prop_map(|v| v.into_iter().map(|(x, y, w, h, s)| det(x, y, w, h, s)).collect())
    }

    proptest! {
        #[test]
        fn nms_survivors_are_independent(dets in arb_dets(), thr in 0.1f64..0.9) {
            let kept = nms(&dets, thr);
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    prop_assert!(aabb_iou(&kept[i].bbox, &kept[j].bbox) <= thr);
                }
            }
        }

        #[test]
        fn refine_is_idempotent_subset(dets in arb_dets(), floor in 0.0f64..0.5) {
            let cfg = RefineConfig { area_ratio_lo: 0.01, area_ratio_hi: 0.2, score_floor: floor, ..Default::default() };
            let once = refine(&dets, 100, 100, &cfg);
            prop_assert!(once.iter().all(|d| dets.contains(d)));
            prop_assert_eq!(refine(&once, 100, 100, &cfg), once);
        }
    }
}
