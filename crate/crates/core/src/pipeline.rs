//! Frames plus instance masks to RGB-mask samples, from either ground truth
//! or detector output.

use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Mask;
use crate::ingest::{
    build_rgb_mask, sample_once_per_second, AnnotationSet, DatasetManifest, DetectionSet, FrameInfo, IngestError,
    RgbMaskSample, SampleMeta,
};
use crate::loceval::{match_frame, GeometryMode, LocEvalError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Match(#[from] LocEvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Side of the square sample patch.
    pub resolution: u32,
    /// Keep only the first frame of every second.
    pub once_per_second: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { resolution: 128, once_per_second: true }
    }
}

/// Reads `root/<image_path>` as RGB.
pub fn load_frame(root: &Path, frame: &FrameInfo) -> Result<RgbImage, IngestError> {
    let path = root.join(&frame.image_path);
    let img = image::open(&path).map_err(|e| IngestError::Image(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    if rgb.dimensions() != (frame.width, frame.height) {
        return Err(IngestError::Image(format!(
            "{}: {}x{} on disk, manifest says {}x{}",
            path.display(),
            rgb.width(),
            rgb.height(),
            frame.width,
            frame.height
        )));
    }
    Ok(rgb)
}

struct Instance {
    mask: Mask,
    identity: Option<String>,
    track: String,
}

fn selected_frames(manifest: &DatasetManifest, cfg: &SampleConfig) -> Vec<(chrono::NaiveDate, FrameInfo)> {
    manifest
        .days
        .iter()
        .flat_map(|d| {
            let frames = if cfg.once_per_second { sample_once_per_second(&d.frames) } else { d.frames.clone() };
            frames.into_iter().map(move |f| (d.day_id, f))
        })
        .collect()
}

fn build<L, I>(manifest: &DatasetManifest, cfg: &SampleConfig, load: L, instances: I) -> Result<Vec<RgbMaskSample>, PipelineError>
where
    L: Fn(&FrameInfo) -> Result<RgbImage, IngestError> + Sync,
    I: Fn(&FrameInfo) -> Result<Vec<Instance>, PipelineError> + Sync,
{
    let per_frame = selected_frames(manifest, cfg)
        .par_iter()
        .map(|(day, frame)| {
            let found = instances(frame)?;
            if found.is_empty() {
                return Ok(Vec::new());
            }
            let img = load(frame)?;
            let mut out = Vec::with_capacity(found.len());
            for (k, inst) in found.into_iter().enumerate() {
                if inst.mask.is_empty() {
                    continue;
                }
                let meta = SampleMeta {
                    sample_id: format!("{}#{k:03}", frame.frame_id),
                    day_id: *day,
                    frame_id: frame.frame_id.clone(),
                    timestamp: frame.timestamp,
                    identity: inst.identity,
                    source_track: inst.track,
                };
                out.push(build_rgb_mask(&img, &inst.mask, cfg.resolution, meta)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(per_frame.into_iter().flatten().collect())
}

/// One sample per ground-truth instance, labelled with its identity.
pub fn samples_from_annotations<L>(
    manifest: &DatasetManifest,
    gt: &AnnotationSet,
    cfg: &SampleConfig,
    load: L,
) -> Result<Vec<RgbMaskSample>, PipelineError>
where
    L: Fn(&FrameInfo) -> Result<RgbImage, IngestError> + Sync,
{
    build(manifest, cfg, load, |frame| {
        Ok(gt
            .get(&frame.frame_id)
            .map(|fa| {
                fa.annotations
                    .iter()
                    .map(|a| Instance { mask: a.mask.clone(), identity: Some(a.identity.clone()), track: a.track_id.clone() })
                    .collect()
            })
            .unwrap_or_default())
    })
}

/// One sample per detection. Box-only detections use their rectangle as the
/// mask. With ground truth supplied, each detection inherits the identity it
/// is matched to by one-to-one maximum-IoU assignment; unmatched ones stay
/// unlabelled, so a split never yields two samples of one animal.
pub fn samples_from_detections<L>(
    manifest: &DatasetManifest,
    dets: &DetectionSet,
    gt: Option<&AnnotationSet>,
    cfg: &SampleConfig,
    load: L,
) -> Result<Vec<RgbMaskSample>, PipelineError>
where
    L: Fn(&FrameInfo) -> Result<RgbImage, IngestError> + Sync,
{
    build(manifest, cfg, load, |frame| {
        let Some(fd) = dets.get(&frame.frame_id) else { return Ok(Vec::new()) };
        let mut found: Vec<Instance> = fd
            .detections
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mask = d.mask.clone().unwrap_or_else(|| {
                    let b = d.bbox;
                    Mask::from_rect(
                        frame.width,
                        frame.height,
                        b.x.floor() as i64,
                        b.y.floor() as i64,
                        b.right().ceil() as i64,
                        b.bottom().ceil() as i64,
                    )
                });
                Instance { mask, identity: None, track: d.track_id.clone().unwrap_or_else(|| format!("det{i}")) }
            })
            .collect();
        if let Some(fa) = gt.and_then(|g| g.get(&frame.frame_id)) {
            let as_dets: Vec<_> = fd
                .detections
                .iter()
                .zip(&found)
                .map(|(d, inst)| crate::refine::Detection { mask: Some(inst.mask.clone()), ..d.clone() })
                .collect();
            let m = match_frame(&frame.frame_id, &fa.annotations, &as_dets, GeometryMode::Mask)?;
            for p in m.pairs {
                found[p.det_index].identity = Some(p.identity);
            }
        }
        Ok(found)
    })
}
