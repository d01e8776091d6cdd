//! Crowded-scene rendering with painter's-algorithm occlusion and exact
//! visible-pixel ground truth.

use chrono::{Days, NaiveDate};
use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gen_herd, HerdSpec, IdentitySpec, SynthError};
use crate::geometry::Mask;
use crate::ingest::{Annotation, AnnotationSet, DatasetManifest, Day, FrameAnnotations, FrameInfo, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub frame_w: u32,
    pub frame_h: u32,
    pub frames: usize,
    /// Fraction by which neighbouring bodies' bounding circles overlap; 0
    /// guarantees disjoint masks.
    pub overlap: f64,
    /// Horizontal herd displacement per frame, pixels.
    pub motion_step: f64,
    /// The herd walks right until it has moved this far, then back.
    pub max_drift: f64,
    pub max_rotation_deg: f64,
    pub background: [u8; 3],
    /// Seconds between consecutive frames.
    pub time_step: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            frame_w: 320,
            frame_h: 240,
            frames: 6,
            overlap: 0.2,
            motion_step: 2.0,
            max_drift: 12.0,
            max_rotation_deg: 20.0,
            background: [96, 118, 84],
            time_step: 1.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.frame_w == 0 || self.frame_h == 0 {
            return Err(SynthError::InvalidSpec("frame dimensions must be positive".into()));
        }
        if self.frames == 0 {
            return Err(SynthError::InvalidSpec("at least one frame per scene is required".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(SynthError::InvalidSpec(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        let positive = self.time_step > 0.0 && self.time_step.is_finite();
        let motion = self.motion_step >= 0.0 && self.motion_step.is_finite() && self.max_drift >= 0.0 && self.max_drift.is_finite();
        if !positive || !motion || !self.max_rotation_deg.is_finite() {
            return Err(SynthError::InvalidSpec("time_step must be positive, motion non-negative, rotation finite".into()));
        }
        Ok(())
    }

    /// Horizontal herd offset on frame `f`: a triangle wave of amplitude
    /// `max_drift` advancing `motion_step` per frame.
    pub fn offset(&self, f: usize) -> f64 {
        let travel = self.motion_step * f as f64;
        if self.max_drift <= 0.0 {
            return 0.0;
        }
        let phase = travel % (2.0 * self.max_drift);
        if phase <= self.max_drift {
            phase
        } else {
            2.0 * self.max_drift - phase
        }
    }
}

/// One body on one frame. Later entries are drawn in front.
#[derive(Clone, Debug)]
pub struct Placement<'a> {
    pub label: &'a str,
    pub pattern: &'a RgbImage,
    pub cx: f64,
    pub cy: f64,
    pub theta: f64,
}

fn silhouette(p: &Placement, w: u32, h: u32) -> Vec<(u32, u32, Rgb<u8>)> {
    let (a, b) = (p.pattern.width() as f64 / 2.0, p.pattern.height() as f64 / 2.0);
    let r = a.max(b) + 1.0;
    let (s, c) = p.theta.sin_cos();
    let x0 = (p.cx - r).floor().max(0.0) as u32;
    let y0 = (p.cy - r).floor().max(0.0) as u32;
    let x1 = ((p.cx + r).ceil().max(0.0) as u32).min(w);
    let y1 = ((p.cy + r).ceil().max(0.0) as u32).min(h);
    let mut out = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let (dx, dy) = (x as f64 + 0.5 - p.cx, y as f64 + 0.5 - p.cy);
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                let px = ((u + a).floor() as i64).clamp(0, p.pattern.width() as i64 - 1) as u32;
                let py = ((v + b).floor() as i64).clamp(0, p.pattern.height() as i64 - 1) as u32;
                out.push((x, y, *p.pattern.get_pixel(px, py)));
            }
        }
    }
    out
}

/// Paints placements in order over `base`. Each annotation's mask is its
/// silhouette minus everything drawn after it; fully hidden bodies are left out.
pub fn render_frame(base: &RgbImage, placements: &[Placement]) -> (RgbImage, Vec<Annotation>) {
    let (w, h) = (base.width(), base.height());
    let mut img = base.clone();
    let mut owner: Vec<Option<usize>> = vec![None; (w * h) as usize];
    for (i, p) in placements.iter().enumerate() {
        for (x, y, px) in silhouette(p, w, h) {
            img.put_pixel(x, y, px);
            owner[(y * w + x) as usize] = Some(i);
        }
    }
    let mut annotations = Vec::new();
    for (i, p) in placements.iter().enumerate() {
        let bits: Vec<bool> = owner.iter().map(|o| *o == Some(i)).collect();
        let mask = Mask::encode(w, h, &bits).expect("sized to frame");
        match mask.to_aabb() {
            Ok(bbox) => annotations.push(Annotation { bbox, mask, identity: p.label.into(), track_id: p.label.into() }),
            Err(_) => log::warn!("identity {} fully occluded; dropped from ground truth", p.label),
        }
    }
    (img, annotations)
}

fn background(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> RgbImage {
    let mut img = RgbImage::from_pixel(spec.frame_w, spec.frame_h, Rgb(spec.background));
    for px in img.pixels_mut() {
        let n: i16 = rng.gen_range(-6..=6);
        for v in px.0.iter_mut() {
            *v = (*v as i16 + n).clamp(0, 255) as u8;
        }
    }
    img
}

struct Layout {
    cols: usize,
    spacing: f64,
    ox: f64,
    oy: f64,
}

/// Grid geometry for `n` bodies whose longer side is `body` pixels, centred
/// in the frame with room for the drift.
fn layout(spec: &SceneSpec, n: usize, body: u32) -> Result<Layout, SynthError> {
    let diameter = body as f64 + 2.0;
    let spacing = (diameter * (1.0 - spec.overlap)).max(1.0);
    let cols = (n.max(1) as f64).sqrt().ceil() as usize;
    let rows = n.max(1).div_ceil(cols);
    let drift = (0..spec.frames).map(|f| spec.offset(f)).fold(0.0, f64::max);
    let extent_w = (cols - 1) as f64 * spacing + diameter + drift;
    let extent_h = (rows - 1) as f64 * spacing + diameter;
    if extent_w > spec.frame_w as f64 || extent_h > spec.frame_h as f64 {
        return Err(SynthError::InvalidSpec(format!(
            "{n} bodies need {extent_w:.0}x{extent_h:.0} px, frame is {}x{}",
            spec.frame_w, spec.frame_h
        )));
    }
    let ox = (spec.frame_w as f64 - extent_w) / 2.0 + diameter / 2.0;
    let oy = (spec.frame_h as f64 - extent_h) / 2.0 + diameter / 2.0;
    Ok(Layout { cols, spacing, ox, oy })
}

pub struct RenderedFrame {
    pub image: RgbImage,
    pub annotations: Vec<Annotation>,
}

/// Grid layout with spacing `(1 - overlap)` body diameters, slots shuffled per
/// scene, depth by row then column, the whole herd swaying left and right.
pub fn gen_scene(spec: &SceneSpec, herd: &[(IdentitySpec, RgbImage)], seed: u64) -> Result<Vec<RenderedFrame>, SynthError> {
    spec.validate()?;
    if herd.is_empty() {
        return Ok((0..spec.frames)
            .map(|_| RenderedFrame { image: RgbImage::from_pixel(spec.frame_w, spec.frame_h, Rgb(spec.background)), annotations: vec![] })
            .collect());
    }
    let body = herd.iter().map(|(s, _)| s.body_w.max(s.body_h)).max().unwrap();
    let Layout { cols, spacing, ox, oy } = layout(spec, herd.len(), body)?;
    let n = herd.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(&mut rng);
    let mut frames = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let base = background(spec, &mut rng);
        let mut placements: Vec<(usize, Placement)> = herd
            .iter()
            .zip(&slots)
            .map(|((id, pattern), &slot)| {
                let theta = rng.gen_range(-1.0..=1.0) * spec.max_rotation_deg.to_radians();
                let place = Placement {
                    label: &id.label,
                    pattern,
                    cx: ox + (slot % cols) as f64 * spacing + spec.offset(f),
                    cy: oy + (slot / cols) as f64 * spacing,
                    theta,
                };
                (slot, place)
            })
            .collect();
        placements.sort_by_key(|(slot, _)| *slot);
        let ordered: Vec<Placement> = placements.into_iter().map(|(_, p)| p).collect();
        let (image, annotations) = render_frame(&base, &ordered);
        frames.push(RenderedFrame { image, annotations });
    }
    Ok(frames)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub days: usize,
    pub start_date: NaiveDate,
    pub herd: HerdSpec,
    pub scene: SceneSpec,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            days: 9,
            start_date: NaiveDate::from_ymd_opt(2024, 10, 30).unwrap(),
            herd: HerdSpec::default(),
            scene: SceneSpec::default(),
        }
    }
}

/// In-memory corpus: manifest, frame images (aligned with manifest order) and
/// ground truth.
pub struct Corpus {
    pub manifest: DatasetManifest,
    pub images: Vec<RgbImage>,
    pub annotations: AnnotationSet,
    pub herd: Vec<IdentitySpec>,
}

impl CorpusSpec {
    /// Cheap checks that need no rendering, layout fit included.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.days == 0 {
            return Err(SynthError::InvalidSpec("at least one day is required".into()));
        }
        self.scene.validate()?;
        self.herd.validate()?;
        layout(&self.scene, self.herd.identities, self.herd.body_w.max(self.herd.body_h)).map(|_| ())
    }
}

pub fn gen_corpus(spec: &CorpusSpec, seed: u64) -> Result<Corpus, SynthError> {
    spec.validate()?;
    let herd = gen_herd(&spec.herd, seed)?;
    let mut days = Vec::with_capacity(spec.days);
    let mut images = Vec::new();
    let mut annotations = AnnotationSet::default();
    for d in 0..spec.days {
        let date = spec
            .start_date
            .checked_add_days(Days::new(d as u64))
            .ok_or_else(|| SynthError::InvalidSpec("date overflow".into()))?;
        let scene = gen_scene(&spec.scene, &herd, seed ^ (0xA5A5_0000 + d as u64))?;
        let mut frames = Vec::with_capacity(scene.len());
        for (k, rendered) in scene.into_iter().enumerate() {
            let frame_id = format!("{date}_f{k:04}");
            frames.push(FrameInfo {
                frame_id: frame_id.clone(),
                timestamp: k as f64 * spec.scene.time_step,
                image_path: format!("frames/{frame_id}.png"),
                width: spec.scene.frame_w,
                height: spec.scene.frame_h,
            });
            annotations.frames.push(FrameAnnotations { frame_id, annotations: rendered.annotations });
            images.push(rendered.image);
        }
        days.push(Day { day_id: date, frames });
    }
    let manifest = DatasetManifest { version: SCHEMA_VERSION, days };
    Ok(Corpus { manifest, images, annotations, herd: herd.into_iter().map(|(s, _)| s).collect() })
}
