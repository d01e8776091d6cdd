//! RGB-mask samples: the mask's foreground copied from the frame, every
//! other pixel painted with the frame's mean (DC) colour.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::geometry::Mask;

/// Identity-bearing crop of one instance on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbMaskSample {
    pub sample_id: String,
    pub pixels: RgbImage,
    pub day_id: NaiveDate,
    pub frame_id: String,
    pub timestamp: f64,
    pub identity: Option<String>,
    pub source_track: String,
    pub dc: [u8; 3],
}

impl RgbMaskSample {
    /// Key shared by all samples cut from the same instant.
    pub fn instant(&self) -> (NaiveDate, u64) {
        (self.day_id, self.timestamp.to_bits())
    }
}

/// Per-channel mean over the whole frame, rounded half-up.
pub fn dc_color(frame: &RgbImage) -> Result<[u8; 3], IngestError> {
    let n = frame.width() as u64 * frame.height() as u64;
    if n == 0 {
        return Err(IngestError::EmptyFrame);
    }
    let mut sums = [0u64; 3];
    for px in frame.pixels() {
        for (sum, v) in sums.iter_mut().zip(px.0) {
            *sum += v as u64;
        }
    }
    Ok(sums.map(|s| ((2 * s + n) / (2 * n)) as u8))
}

/// Metadata carried into a sample.
#[derive(Clone, Debug)]
pub struct SampleMeta {
    pub sample_id: String,
    pub day_id: NaiveDate,
    pub frame_id: String,
    pub timestamp: f64,
    pub identity: Option<String>,
    pub source_track: String,
}

/// Crops the mask's tight bounding box, paints background with the DC colour
/// and nearest-neighbour resizes to `out_resolution` squared.
pub fn build_rgb_mask(
    frame: &RgbImage,
    mask: &Mask,
    out_resolution: u32,
    meta: SampleMeta,
) -> Result<RgbMaskSample, IngestError> {
    if mask.width() != frame.width() || mask.height() != frame.height() {
        return Err(IngestError::MaskFrameMismatch {
            mask: (mask.width(), mask.height()),
            frame: (frame.width(), frame.height()),
        });
    }
    if out_resolution == 0 {
        return Err(IngestError::Malformed { line: None, message: "output resolution must be positive".into() });
    }
    let dc = dc_color(frame)?;
    let bbox = mask.to_aabb().map_err(|_| IngestError::EmptyMask(meta.sample_id.clone()))?;
    let (x0, y0, cw, ch) = (bbox.x as u32, bbox.y as u32, bbox.w as u32, bbox.h as u32);
    let bits = mask.decode();
    let fw = frame.width();
    let mut crop = RgbImage::from_pixel(cw, ch, Rgb(dc));
    for y in 0..ch {
        for x in 0..cw {
            let (fx, fy) = (x0 + x, y0 + y);
            if bits[(fy * fw + fx) as usize] {
                crop.put_pixel(x, y, *frame.get_pixel(fx, fy));
            }
        }
    }
    let pixels = resize_nearest(&crop, out_resolution, out_resolution);
    Ok(RgbMaskSample {
        sample_id: meta.sample_id,
        pixels,
        day_id: meta.day_id,
        frame_id: meta.frame_id,
        timestamp: meta.timestamp,
        identity: meta.identity,
        source_track: meta.source_track,
        dc,
    })
}

/// Nearest-neighbour resize sampling source pixel centres.
pub fn resize_nearest(src: &RgbImage, w: u32, h: u32) -> RgbImage {
    let (sw, sh) = (src.width() as u64, src.height() as u64);
    RgbImage::from_fn(w, h, |x, y| {
        let sx = ((2 * x as u64 + 1) * sw / (2 * w as u64)).min(sw - 1);
        let sy = ((2 * y as u64 + 1) * sh / (2 * h as u64)).min(sh - 1);
        *src.get_pixel(sx as u32, sy as u32)
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    sample_id: String,
    day_id: NaiveDate,
    frame_id: String,
    timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    identity: Option<String>,
    source_track: String,
    dc: [u8; 3],
    image_path: String,
}

/// Writes samples as PNGs under `dir/patches/` plus a `samples.jsonl` index.
pub fn write_samples(dir: &Path, samples: &[RgbMaskSample]) -> Result<(), IngestError> {
    let patches = dir.join("patches");
    std::fs::create_dir_all(&patches).map_err(|e| IngestError::io(&patches, e))?;
    let index = dir.join("samples.jsonl");
    let mut w = BufWriter::new(File::create(&index).map_err(|e| IngestError::io(&index, e))?);
    for s in samples {
        let file_name = format!("{}.png", sanitize(&s.sample_id));
        let path = patches.join(&file_name);
        s.pixels.save(&path).map_err(|e| IngestError::Image(format!("{}: {e}", path.display())))?;
        let rec = SampleRecord {
            sample_id: s.sample_id.clone(),
            day_id: s.day_id,
            frame_id: s.frame_id.clone(),
            timestamp: s.timestamp,
            identity: s.identity.clone(),
            source_track: s.source_track.clone(),
            dc: s.dc,
            image_path: format!("patches/{file_name}"),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| IngestError::Malformed { line: None, message: e.to_string() })?;
        w.write_all(b"\n").map_err(|e| IngestError::io(&index, e))?;
    }
    w.flush().map_err(|e| IngestError::io(&index, e))
}

pub fn load_samples(dir: &Path) -> Result<Vec<RgbMaskSample>, IngestError> {
    let index = dir.join("samples.jsonl");
    let file = File::open(&index).map_err(|e| IngestError::io(&index, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(&index, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::Malformed { line: Some(i + 1), message: e.to_string() })?;
        let path = dir.join(&rec.image_path);
        let pixels = image::open(&path)
            .map_err(|e| IngestError::Image(format!("{}: {e}", path.display())))?
            .to_rgb8();
        out.push(RgbMaskSample {
            sample_id: rec.sample_id,
            pixels,
            day_id: rec.day_id,
            frame_id: rec.frame_id,
            timestamp: rec.timestamp,
            identity: rec.identity,
            source_track: rec.source_track,
            dc: rec.dc,
        });
    }
    Ok(out)
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
