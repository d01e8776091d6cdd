//! Detector-output emulation: jitter, drops, over- and under-segmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::Mask;
use crate::ingest::{AnnotationSet, DetectionSet, FrameDetections};
use crate::refine::Detection;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Standard deviation of the per-instance translation, pixels.
    pub jitter_sigma: f64,
    pub drop_rate: f64,
    /// Chance an instance is split into left and right halves.
    pub split_rate: f64,
    /// Chance an instance absorbs its nearest neighbour.
    pub merge_rate: f64,
    /// Scores are `1 - |N(0, score_noise)|`, clamped to [0, 1].
    pub score_noise: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self { jitter_sigma: 0.0, drop_rate: 0.0, split_rate: 0.0, merge_rate: 0.0, score_noise: 0.0 }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [("drop_rate", self.drop_rate), ("split_rate", self.split_rate), ("merge_rate", self.merge_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::InvalidSpec(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) || !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return Err(SynthError::InvalidSpec("jitter_sigma and score_noise must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Ground truth repackaged as perfect detections (score 1, track = identity).
pub fn annotations_as_detections(gt: &AnnotationSet) -> DetectionSet {
    DetectionSet {
        frames: gt
            .frames
            .iter()
            .map(|f| FrameDetections {
                frame_id: f.frame_id.clone(),
                detections: f
                    .annotations
                    .iter()
                    .map(|a| Detection {
                        frame_id: f.frame_id.clone(),
                        bbox: a.bbox,
                        score: 1.0,
                        mask: Some(a.mask.clone()),
                        track_id: Some(a.identity.clone()),
                    })
                    .collect(),
            })
            .collect(),
    }
}

struct Draw {
    dx: i64,
    dy: i64,
    drop: f64,
    merge: f64,
    split: f64,
    score: f64,
}

fn centre(m: &Mask) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in m.pixels() {
        sx += x as f64;
        sy += y as f64;
        n += 1.0;
    }
    (sx / n.max(1.0), sy / n.max(1.0))
}

fn split_halves(m: &Mask) -> (Mask, Mask) {
    let mut xs: Vec<u32> = m.pixels().map(|(x, _)| x).collect();
    xs.sort_unstable();
    let median = xs.get(xs.len() / 2).copied().unwrap_or(0);
    (m.filter(|x, _| x < median), m.filter(|x, _| x >= median))
}

fn emit(frame_id: &str, mask: Mask, score: f64, track: &str) -> Option<Detection> {
    let bbox = mask.to_aabb().ok()?;
    Some(Detection { frame_id: frame_id.into(), bbox, score, mask: Some(mask), track_id: Some(track.into()) })
}

/// Every annotation consumes the same six random draws whatever the rates,
/// so sweeping one parameter leaves all other decisions unchanged.
pub fn corrupt(gt: &AnnotationSet, spec: &CorruptionSpec, seed: u64) -> Result<DetectionSet, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(gt.frames.len());
    for f in &gt.frames {
        let draws: Vec<Draw> = f
            .annotations
            .iter()
            .map(|_| {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                let drop = rng.gen();
                let merge = rng.gen();
                let split = rng.gen();
                let zs: f64 = rng.sample(StandardNormal);
                Draw {
                    dx: (zx * spec.jitter_sigma).round() as i64,
                    dy: (zy * spec.jitter_sigma).round() as i64,
                    drop,
                    merge,
                    split,
                    score: (1.0 - (zs * spec.score_noise).abs()).clamp(0.0, 1.0),
                }
            })
            .collect();
        let centres: Vec<(f64, f64)> = f.annotations.iter().map(|a| centre(&a.mask)).collect();
        let mut absorbed = vec![false; f.annotations.len()];
        let mut detections = Vec::new();
        for (i, a) in f.annotations.iter().enumerate() {
            let d = &draws[i];
            if absorbed[i] || d.drop < spec.drop_rate {
                continue;
            }
            let moved = |m: &Mask| if d.dx == 0 && d.dy == 0 { m.clone() } else { m.translate(d.dx, d.dy) };
            let mut mask = moved(&a.mask);
            if d.merge < spec.merge_rate {
                let partner = (0..f.annotations.len()).filter(|&j| j != i).min_by(|&p, &q| {
                    let dist = |j: usize| (centres[j].0 - centres[i].0).powi(2) + (centres[j].1 - centres[i].1).powi(2);
                    dist(p).total_cmp(&dist(q)).then(p.cmp(&q))
                });
                if let Some(j) = partner {
                    mask = mask.union(&moved(&f.annotations[j].mask)).map_err(|e| SynthError::Geometry(e.to_string()))?;
                    absorbed[j] = true;
                }
                detections.extend(emit(&f.frame_id, mask, d.score, &a.identity));
            } else if d.split < spec.split_rate {
                let (left, right) = split_halves(&mask);
                detections.extend(emit(&f.frame_id, left, d.score, &a.identity));
                detections.extend(emit(&f.frame_id, right, d.score, &a.identity));
            } else {
                detections.extend(emit(&f.frame_id, mask, d.score, &a.identity));
            }
        }
        frames.push(FrameDetections { frame_id: f.frame_id.clone(), detections });
    }
    Ok(DetectionSet { frames })
}
