//! Localisation evaluation: optimal per-frame matching of detections to ground
//! truth and the IoU / TP-accuracy / usage-rate / matching-rate metrics.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{aabb_iou, mask_iou, min_area_obb, obb_iou, GeometryError, Obb};
use crate::ingest::{Annotation, AnnotationSet, DetectionSet};
use crate::refine::Detection;
use crate::reideval::{hungarian_assign, AssignmentError};

#[derive(Debug, Error)]
pub enum LocEvalError {
    #[error("frame {frame_id}: {mode} geometry needs masks, but {which} {index} has none")]
    MissingMask { frame_id: String, mode: &'static str, which: &'static str, index: usize },
    #[error("frame {frame_id}: {source}")]
    Geometry {
        frame_id: String,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    Aabb,
    /// Minimum-area rectangles fitted to the masks on both sides.
    Obb,
    Mask,
}

impl GeometryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeometryMode::Aabb => "aabb",
            GeometryMode::Obb => "obb",
            GeometryMode::Mask => "mask",
        }
    }
}

/// Which of the two readings of "TP accuracy" to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TpAccuracyMode {
    /// Share of individuals whose clip-average IoU clears the threshold.
    WellDetectedFraction,
    /// Mean clip-average IoU over the well-detected individuals only.
    WellDetectedMeanIou,
}

/// Denominator of the matching rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingRateMode {
    /// Ground-truth instances with a match above the threshold / all GT.
    GroundTruth,
    /// Detections with a match above the threshold / all detections.
    Detections,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocEvalConfig {
    pub iou_threshold: f64,
    pub well_detected_threshold: f64,
    pub tp_accuracy: TpAccuracyMode,
    pub matching_rate: MatchingRateMode,
}

impl Default for LocEvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.7,
            well_detected_threshold: 0.7,
            tp_accuracy: TpAccuracyMode::WellDetectedFraction,
            matching_rate: MatchingRateMode::GroundTruth,
        }
    }
}

impl LocEvalConfig {
    pub fn validate(&self) -> Result<(), LocEvalError> {
        for (name, v) in [("iou_threshold", self.iou_threshold), ("well_detected_threshold", self.well_detected_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LocEvalError::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchPair {
    pub gt_index: usize,
    pub identity: String,
    pub det_index: usize,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub frame_id: String,
    /// Sorted by GT index.
    pub pairs: Vec<MatchPair>,
    pub unmatched_gt: Vec<String>,
    pub unmatched_det: Vec<usize>,
    pub n_gt: usize,
    pub n_det: usize,
}

fn obbs_from_masks<'a>(
    frame_id: &str,
    masks: impl Iterator<Item = Option<&'a crate::geometry::Mask>>,
    which: &'static str,
) -> Result<Vec<Obb>, LocEvalError> {
    masks
        .enumerate()
        .map(|(i, m)| {
            let m = m.ok_or(LocEvalError::MissingMask { frame_id: frame_id.into(), mode: "obb", which, index: i })?;
            min_area_obb(m).map_err(|source| LocEvalError::Geometry { frame_id: frame_id.into(), source })
        })
        .collect()
}

/// IoU matrix, GT rows by detection columns.
pub fn iou_matrix(frame_id: &str, gt: &[Annotation], dets: &[Detection], mode: GeometryMode) -> Result<Vec<Vec<f64>>, LocEvalError> {
    match mode {
        GeometryMode::Aabb => Ok(gt.iter().map(|g| dets.iter().map(|d| aabb_iou(&g.bbox, &d.bbox)).collect()).collect()),
        GeometryMode::Obb => {
            let go = obbs_from_masks(frame_id, gt.iter().map(|g| Some(&g.mask)), "annotation")?;
            let dobb = obbs_from_masks(frame_id, dets.iter().map(|d| d.mask.as_ref()), "detection")?;
            Ok(go.iter().map(|g| dobb.iter().map(|d| obb_iou(g, d)).collect()).collect())
        }
        GeometryMode::Mask => {
            if let Some(i) = dets.iter().position(|d| d.mask.is_none()) {
                return Err(LocEvalError::MissingMask { frame_id: frame_id.into(), mode: "mask", which: "detection", index: i });
            }
            gt.iter()
                .map(|g| {
                    dets.iter()
                        .map(|d| match mask_iou(&g.mask, d.mask.as_ref().unwrap()) {
                            // two empty regions share no pixels to match on
                            Err(GeometryError::EmptyPair) => Ok(0.0),
                            r => r.map_err(|source| LocEvalError::Geometry { frame_id: frame_id.into(), source }),
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Maximum-total-IoU one-to-one matching; zero-IoU pairs are discarded.
pub fn match_frame(frame_id: &str, gt: &[Annotation], dets: &[Detection], mode: GeometryMode) -> Result<MatchResult, LocEvalError> {
    let iou = iou_matrix(frame_id, gt, dets, mode)?;
    let cost: Vec<Vec<f64>> = iou.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let assignment = hungarian_assign(&cost)?;
    let mut pairs = Vec::new();
    let mut det_used = vec![false; dets.len()];
    for (g, d) in assignment.pairs() {
        if iou[g][d] > 0.0 {
            det_used[d] = true;
            pairs.push(MatchPair { gt_index: g, identity: gt[g].identity.clone(), det_index: d, iou: iou[g][d] });
        }
    }
    let matched: Vec<bool> = (0..gt.len()).map(|g| pairs.iter().any(|p| p.gt_index == g)).collect();
    Ok(MatchResult {
        frame_id: frame_id.into(),
        unmatched_gt: gt.iter().zip(&matched).filter(|(_, &m)| !m).map(|(a, _)| a.identity.clone()).collect(),
        unmatched_det: (0..dets.len()).filter(|&d| !det_used[d]).collect(),
        pairs,
        n_gt: gt.len(),
        n_det: dets.len(),
    })
}

/// Track id to identity by majority vote over all matched pairs; vote ties
/// go to the lexicographically smallest identity.
pub fn associate_tracks(matches: &[MatchResult], dets: &DetectionSet) -> BTreeMap<String, String> {
    let mut votes: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for m in matches {
        let Some(fd) = dets.get(&m.frame_id) else { continue };
        for p in &m.pairs {
            if let Some(track) = &fd.detections[p.det_index].track_id {
                *votes.entry(track.clone()).or_default().entry(p.identity.clone()).or_default() += 1;
            }
        }
    }
    votes
        .into_iter()
        .map(|(track, v)| {
            let top = *v.values().max().unwrap();
            let id = v.into_iter().find(|(_, c)| *c == top).unwrap().0;
            (track, id)
        })
        .collect()
}

/// Clip-average IoU per identity over every frame it appears in. A frame
/// counts 0 when the identity is unmatched or matched by a detection whose
/// track belongs to another identity.
pub fn per_individual_iou(
    matches: &[MatchResult],
    gt: &AnnotationSet,
    dets: &DetectionSet,
    tracks: &BTreeMap<String, String>,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let by_frame: HashMap<&str, &MatchResult> = matches.iter().map(|m| (m.frame_id.as_str(), m)).collect();
    for frame in &gt.frames {
        let m = by_frame.get(frame.frame_id.as_str());
        let fd = dets.get(&frame.frame_id);
        for a in &frame.annotations {
            let iou = m
                .and_then(|m| m.pairs.iter().find(|p| p.identity == a.identity))
                .filter(|p| {
                    let track = fd.and_then(|fd| fd.detections[p.det_index].track_id.as_ref());
                    track.is_none_or(|t| tracks.get(t) == Some(&a.identity))
                })
                .map_or(0.0, |p| p.iou);
            let e = acc.entry(a.identity.clone()).or_default();
            e.0 += iou;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameSeries {
    pub frame_id: String,
    /// Pair IoU sum over GT count; `None` on frames without GT.
    pub mean_iou: Option<f64>,
    /// `None` on frames without detections.
    pub usage_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalisationReport {
    pub mode: GeometryMode,
    pub mean_iou: f64,
    pub tp_accuracy: f64,
    /// `None` when there are no detections at all.
    pub usage_rate: Option<f64>,
    pub matching_rate: f64,
    pub per_frame: Vec<FrameSeries>,
    pub per_individual: BTreeMap<String, f64>,
    pub n_gt: usize,
    pub n_det: usize,
    pub well_detected: usize,
}

/// Per-frame series from match results, in the given order.
pub fn per_frame_series(matches: &[MatchResult], threshold: f64) -> Vec<FrameSeries> {
    matches
        .iter()
        .map(|m| FrameSeries {
            frame_id: m.frame_id.clone(),
            mean_iou: (m.n_gt > 0).then(|| m.pairs.iter().map(|p| p.iou).sum::<f64>() / m.n_gt as f64),
            usage_rate: (m.n_det > 0).then(|| m.pairs.iter().filter(|p| p.iou > threshold).count() as f64 / m.n_det as f64),
        })
        .collect()
}

/// Frames in GT order, then any detection-only frames in detection order.
pub fn match_clip(gt: &AnnotationSet, dets: &DetectionSet, mode: GeometryMode) -> Result<Vec<MatchResult>, LocEvalError> {
    let mut frames: Vec<&str> = gt.frames.iter().map(|f| f.frame_id.as_str()).collect();
    for f in &dets.frames {
        if gt.get(&f.frame_id).is_none() {
            frames.push(&f.frame_id);
        }
    }
    frames
        .par_iter()
        .map(|&fid| {
            let g = gt.get(fid).map_or(&[][..], |f| &f.annotations);
            let d = dets.get(fid).map_or(&[][..], |f| &f.detections);
            match_frame(fid, g, d, mode)
        })
        .collect()
}

pub fn localisation_metrics(
    matches: &[MatchResult],
    per_individual: BTreeMap<String, f64>,
    mode: GeometryMode,
    cfg: &LocEvalConfig,
) -> LocalisationReport {
    let n_gt: usize = matches.iter().map(|m| m.n_gt).sum();
    let n_det: usize = matches.iter().map(|m| m.n_det).sum();
    let iou_sum: f64 = matches.iter().map(|m| m.pairs.iter().map(|p| p.iou).sum::<f64>()).sum();
    let good: usize = matches.iter().map(|m| m.pairs.iter().filter(|p| p.iou > cfg.iou_threshold).count()).sum();
    let well: Vec<f64> = per_individual.values().copied().filter(|&v| v > cfg.well_detected_threshold).collect();
    let tp_accuracy = match cfg.tp_accuracy {
        TpAccuracyMode::WellDetectedFraction if !per_individual.is_empty() => well.len() as f64 / per_individual.len() as f64,
        TpAccuracyMode::WellDetectedMeanIou if !well.is_empty() => well.iter().sum::<f64>() / well.len() as f64,
        _ => 0.0,
    };
    let usage_rate = (n_det > 0).then(|| good as f64 / n_det as f64);
    let matching_rate = match cfg.matching_rate {
        MatchingRateMode::GroundTruth if n_gt > 0 => good as f64 / n_gt as f64,
        MatchingRateMode::Detections if n_det > 0 => good as f64 / n_det as f64,
        _ => 0.0,
    };
    LocalisationReport {
        mode,
        mean_iou: if n_gt > 0 { iou_sum / n_gt as f64 } else { 0.0 },
        tp_accuracy,
        usage_rate,
        matching_rate,
        per_frame: per_frame_series(matches, cfg.iou_threshold),
        well_detected: well.len(),
        per_individual,
        n_gt,
        n_det,
    }
}

/// Matching, track association and all metrics for one clip.
pub fn evaluate_clip(
    gt: &AnnotationSet,
    dets: &DetectionSet,
    mode: GeometryMode,
    cfg: &LocEvalConfig,
) -> Result<LocalisationReport, LocEvalError> {
    cfg.validate()?;
    let matches = match_clip(gt, dets, mode)?;
    let tracks = associate_tracks(&matches, dets);
    let per_individual = per_individual_iou(&matches, gt, dets, &tracks);
    Ok(localisation_metrics(&matches, per_individual, mode, cfg))
}
