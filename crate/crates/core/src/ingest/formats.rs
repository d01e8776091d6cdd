//! On-disk formats: `manifest.json`, `detections.jsonl` and
//! `annotations.jsonl`. Every loader validates its invariants before
//! returning, so a loaded dataset is always internally consistent.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::geometry::{Aabb, Mask};
use crate::refine::Detection;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameInfo {
    pub frame_id: String,
    /// Seconds since the start of the recording day.
    pub timestamp: f64,
    pub image_path: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Day {
    pub day_id: NaiveDate,
    pub frames: Vec<FrameInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub days: Vec<Day>,
}

impl DatasetManifest {
    pub fn new(days: Vec<Day>) -> Self {
        Self { version: SCHEMA_VERSION, days }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.version != SCHEMA_VERSION {
            return Err(IngestError::UnsupportedVersion(self.version));
        }
        let mut seen_ids = BTreeSet::new();
        let mut seen_days = BTreeSet::new();
        for day in &self.days {
            if !seen_days.insert(day.day_id) {
                return Err(IngestError::DuplicateDay(day.day_id));
            }
            let mut prev: Option<f64> = None;
            for f in &day.frames {
                if !seen_ids.insert(f.frame_id.as_str()) {
                    return Err(IngestError::DuplicateFrame(f.frame_id.clone()));
                }
                if !f.timestamp.is_finite() || prev.is_some_and(|p| f.timestamp <= p) {
                    return Err(IngestError::NonIncreasingTimestamp {
                        day: day.day_id,
                        frame_id: f.frame_id.clone(),
                    });
                }
                if f.width == 0 || f.height == 0 {
                    return Err(IngestError::Malformed {
                        line: None,
                        message: format!("frame {} has zero size", f.frame_id),
                    });
                }
                prev = Some(f.timestamp);
            }
        }
        Ok(())
    }

    /// Frame lookup: `frame_id -> (day, frame)`.
    pub fn frame_index(&self) -> HashMap<&str, (&Day, &FrameInfo)> {
        self.days
            .iter()
            .flat_map(|d| d.frames.iter().map(move |f| (f.frame_id.as_str(), (d, f))))
            .collect()
    }

    pub fn frames(&self) -> impl Iterator<Item = (&Day, &FrameInfo)> {
        self.days.iter().flat_map(|d| d.frames.iter().map(move |f| (d, f)))
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IngestError::Malformed { line: None, message: e.to_string() })?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, manifest)
        .map_err(|e| IngestError::Malformed { line: None, message: e.to_string() })?;
    w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionEntry {
    #[serde(rename = "box")]
    bbox: Aabb,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    track_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rle: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    #[serde(default = "schema_version")]
    version: u32,
    frame_id: String,
    detections: Vec<DetectionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationEntry {
    #[serde(rename = "box")]
    bbox: Aabb,
    rle: Vec<u32>,
    identity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    track_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    #[serde(default = "schema_version")]
    version: u32,
    frame_id: String,
    #[serde(alias = "detections")]
    annotations: Vec<AnnotationEntry>,
}

/// Ground-truth instance on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub bbox: Aabb,
    pub mask: Mask,
    pub identity: String,
    pub track_id: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameAnnotations {
    pub frame_id: String,
    pub annotations: Vec<Annotation>,
}

/// Per-frame ground truth, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnnotationSet {
    pub frames: Vec<FrameAnnotations>,
}

impl AnnotationSet {
    pub fn get(&self, frame_id: &str) -> Option<&FrameAnnotations> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let mut frames = BTreeSet::new();
        for f in &self.frames {
            if !frames.insert(f.frame_id.as_str()) {
                return Err(IngestError::DuplicateFrame(f.frame_id.clone()));
            }
            let mut ids = BTreeSet::new();
            for a in &f.annotations {
                if !ids.insert(a.identity.as_str()) {
                    return Err(IngestError::DuplicateIdentity {
                        frame_id: f.frame_id.clone(),
                        identity: a.identity.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameDetections {
    pub frame_id: String,
    pub detections: Vec<Detection>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    pub frames: Vec<FrameDetections>,
}

impl DetectionSet {
    pub fn get(&self, frame_id: &str) -> Option<&FrameDetections> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn len(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn decode_rle(
    frame: &FrameInfo,
    runs: &[u32],
    line: usize,
) -> Result<Mask, IngestError> {
    Mask::from_runs(frame.width, frame.height, runs).map_err(|_| IngestError::RleLength {
        line,
        frame_id: frame.frame_id.clone(),
        expected: frame.width as u64 * frame.height as u64,
        actual: runs.iter().map(|&r| r as u64).sum(),
    })
}

fn parse_line<T: for<'de> Deserialize<'de>>(line_no: usize, text: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Malformed { line: Some(line_no), message: e.to_string() })
}

pub fn load_detections(path: &Path, manifest: &DatasetManifest) -> Result<DetectionSet, IngestError> {
    let index = manifest.frame_index();
    let mut set = DetectionSet::default();
    let mut seen = BTreeSet::new();
    for (line_no, text) in read_lines(path)? {
        let rec: DetectionRecord = parse_line(line_no, &text)?;
        if rec.version != SCHEMA_VERSION {
            return Err(IngestError::UnsupportedVersion(rec.version));
        }
        let (_, frame) = *index
            .get(rec.frame_id.as_str())
            .ok_or_else(|| IngestError::UnknownFrame { line: line_no, frame_id: rec.frame_id.clone() })?;
        if !seen.insert(rec.frame_id.clone()) {
            return Err(IngestError::DuplicateFrame(rec.frame_id));
        }
        let mut dets = Vec::with_capacity(rec.detections.len());
        for entry in rec.detections {
            if !(0.0..=1.0).contains(&entry.score) {
                return Err(IngestError::Malformed {
                    line: Some(line_no),
                    message: format!("score {} outside [0, 1]", entry.score),
                });
            }
            let mask = entry.rle.as_deref().map(|r| decode_rle(frame, r, line_no)).transpose()?;
            dets.push(Detection {
                frame_id: rec.frame_id.clone(),
                bbox: entry.bbox,
                score: entry.score,
                mask,
                track_id: entry.track_id,
            });
        }
        set.frames.push(FrameDetections { frame_id: rec.frame_id, detections: dets });
    }
    Ok(set)
}

pub fn write_detections(path: &Path, set: &DetectionSet) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in &set.frames {
        let rec = DetectionRecord {
            version: SCHEMA_VERSION,
            frame_id: f.frame_id.clone(),
            detections: f
                .detections
                .iter()
                .map(|d| DetectionEntry {
                    bbox: d.bbox,
                    score: d.score,
                    track_id: d.track_id.clone(),
                    rle: d.mask.as_ref().map(|m| m.runs().to_vec()),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| IngestError::Malformed { line: None, message: e.to_string() })?;
        w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}

pub fn load_annotations(path: &Path, manifest: &DatasetManifest) -> Result<AnnotationSet, IngestError> {
    let index = manifest.frame_index();
    let mut set = AnnotationSet::default();
    for (line_no, text) in read_lines(path)? {
        let rec: AnnotationRecord = parse_line(line_no, &text)?;
        if rec.version != SCHEMA_VERSION {
            return Err(IngestError::UnsupportedVersion(rec.version));
        }
        let (_, frame) = *index
            .get(rec.frame_id.as_str())
            .ok_or_else(|| IngestError::UnknownFrame { line: line_no, frame_id: rec.frame_id.clone() })?;
        let mut anns = Vec::with_capacity(rec.annotations.len());
        for entry in rec.annotations {
            let mask = decode_rle(frame, &entry.rle, line_no)?;
            let track_id = entry.track_id.unwrap_or_else(|| entry.identity.clone());
            anns.push(Annotation { bbox: entry.bbox, mask, identity: entry.identity, track_id });
        }
        set.frames.push(FrameAnnotations { frame_id: rec.frame_id, annotations: anns });
    }
    set.validate()?;
    Ok(set)
}

pub fn write_annotations(path: &Path, set: &AnnotationSet) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in &set.frames {
        let rec = AnnotationRecord {
            version: SCHEMA_VERSION,
            frame_id: f.frame_id.clone(),
            annotations: f
                .annotations
                .iter()
                .map(|a| AnnotationEntry {
                    bbox: a.bbox,
                    rle: a.mask.runs().to_vec(),
                    identity: a.identity.clone(),
                    track_id: Some(a.track_id.clone()),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| IngestError::Malformed { line: None, message: e.to_string() })?;
        w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}
