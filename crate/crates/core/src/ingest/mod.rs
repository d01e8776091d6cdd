//! Dataset model and file formats: manifests, detections, ground-truth
//! annotations, once-per-second frame sampling and RGB-mask samples.

mod formats;
mod rgbmask;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

pub use formats::{
    load_annotations, load_detections, load_manifest, write_annotations, write_detections, write_manifest,
    Annotation, AnnotationSet, DatasetManifest, Day, DetectionSet, FrameAnnotations, FrameDetections, FrameInfo,
    SCHEMA_VERSION,
};
pub use rgbmask::{
    build_rgb_mask, dc_color, load_samples, resize_nearest, write_samples, RgbMaskSample, SampleMeta,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Malformed { line: Option<usize>, message: String },
    #[error("unsupported schema version {0}")]
    UnsupportedVersion(u32),
    #[error("line {line}: RLE for frame {frame_id} covers {actual} pixels, frame has {expected}")]
    RleLength { line: usize, frame_id: String, expected: u64, actual: u64 },
    #[error("duplicate identity {identity} in frame {frame_id}")]
    DuplicateIdentity { frame_id: String, identity: String },
    #[error("line {line}: unknown frame_id {frame_id}")]
    UnknownFrame { line: usize, frame_id: String },
    #[error("duplicate frame_id {0}")]
    DuplicateFrame(String),
    #[error("duplicate day {0}")]
    DuplicateDay(NaiveDate),
    #[error("timestamps not strictly increasing on {day} at frame {frame_id}")]
    NonIncreasingTimestamp { day: NaiveDate, frame_id: String },
    #[error("frame has no pixels")]
    EmptyFrame,
    #[error("mask for sample {0} is empty")]
    EmptyMask(String),
    #[error("mask grid {mask:?} does not match frame {frame:?}")]
    MaskFrameMismatch { mask: (u32, u32), frame: (u32, u32) },
    #[error("image error: {0}")]
    Image(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }
}

/// Keeps the first frame at or after each whole-second boundary, starting
/// from the first frame's second.
pub fn sample_once_per_second(frames: &[FrameInfo]) -> Vec<FrameInfo> {
    let mut out = Vec::new();
    let mut boundary = f64::NEG_INFINITY;
    for f in frames {
        if f.timestamp >= boundary {
            out.push(f.clone());
            boundary = f.timestamp.floor() + 1.0;
        }
    }
    out
}
