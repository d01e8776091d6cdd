//! Black-and-white coat patterns from thresholded value noise. All arithmetic
//! is integer so patterns are identical on every platform.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub label: String,
    pub pattern_seed: u64,
    pub body_w: u32,
    pub body_h: u32,
    /// Fraction of the lattice value range painted black; 0 gives a white coat.
    pub density: f64,
    /// Noise lattice spacing in pixels (blob size).
    pub scale: u32,
    /// Replaces the pattern with a uniform coat colour.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<[u8; 3]>,
}

const WHITE: [u8; 3] = [245, 245, 240];
const BLACK: [u8; 3] = [20, 20, 22];
const ONE: u64 = 1 << 16;

pub fn gen_identity_pattern(spec: &IdentitySpec) -> Result<RgbImage, SynthError> {
    if spec.body_w == 0 || spec.body_h == 0 || spec.scale == 0 {
        return Err(SynthError::InvalidSpec(format!("identity {}: body dims and scale must be positive", spec.label)));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(SynthError::InvalidSpec(format!("identity {}: density outside [0, 1]", spec.label)));
    }
    if let Some(c) = spec.solid {
        return Ok(RgbImage::from_pixel(spec.body_w, spec.body_h, Rgb(c)));
    }
    let s = spec.scale as u64;
    let gw = spec.body_w as usize / spec.scale as usize + 2;
    let gh = spec.body_h as usize / spec.scale as usize + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.pattern_seed);
    let lattice: Vec<u64> = (0..gw * gh).map(|_| rng.gen_range(0..ONE)).collect();
    let threshold = (spec.density * ONE as f64).round() as u64;
    Ok(RgbImage::from_fn(spec.body_w, spec.body_h, |x, y| {
        let (gx, gy) = (x as u64 / s, y as u64 / s);
        let (fx, fy) = (x as u64 % s, y as u64 % s);
        let at = |i: u64, j: u64| lattice[j as usize * gw + i as usize];
        // bilinear blend in units of s*s
        let top = at(gx, gy) * (s - fx) + at(gx + 1, gy) * fx;
        let bottom = at(gx, gy + 1) * (s - fx) + at(gx + 1, gy + 1) * fx;
        let v = (top * (s - fy) + bottom * fy) / (s * s);
        Rgb(if v < threshold { BLACK } else { WHITE })
    }))
}

/// Fraction of pixels that differ between two equally sized patterns.
pub fn pattern_difference(a: &RgbImage, b: &RgbImage) -> f64 {
    let n = a.pixels().len().max(1);
    a.pixels().zip(b.pixels()).filter(|(p, q)| p != q).count() as f64 / n as f64
}

pub const MIN_PATTERN_DIFFERENCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HerdSpec {
    pub identities: usize,
    pub body_w: u32,
    pub body_h: u32,
    pub density: f64,
    pub scale: u32,
    /// Uniform, well-separated coat colours instead of patterns.
    pub solid_colors: bool,
}

impl Default for HerdSpec {
    fn default() -> Self {
        Self { identities: 20, body_w: 64, body_h: 40, density: 0.45, scale: 8, solid_colors: false }
    }
}

impl HerdSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.identities == 0 {
            return Err(SynthError::InvalidSpec("herd needs at least one identity".into()));
        }
        if self.body_w == 0 || self.body_h == 0 || self.scale == 0 {
            return Err(SynthError::InvalidSpec("body dims and scale must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(SynthError::InvalidSpec(format!("density {} outside [0, 1]", self.density)));
        }
        Ok(())
    }
}

pub fn hue_color(i: usize, n: usize) -> [u8; 3] {
    // evenly spaced hues, alternating two brightness levels
    let h = i as f64 / n as f64 * 6.0;
    let v = if i.is_multiple_of(2) { 1.0 } else { 0.65 };
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * v * 255.0).round() as u8, (g * v * 255.0).round() as u8, (b * v * 255.0).round() as u8]
}

/// Identity specs whose patterns pairwise differ in at least 5% of pixels;
/// a colliding seed is replaced by the next one.
pub fn gen_herd(spec: &HerdSpec, seed: u64) -> Result<Vec<(IdentitySpec, RgbImage)>, SynthError> {
    spec.validate()?;
    let mut out: Vec<(IdentitySpec, RgbImage)> = Vec::with_capacity(spec.identities);
    let mut next_seed = seed;
    for i in 0..spec.identities {
        let label = format!("cow{:02}", i + 1);
        let mut attempts = 0;
        loop {
            let id = IdentitySpec {
                label: label.clone(),
                pattern_seed: next_seed,
                body_w: spec.body_w,
                body_h: spec.body_h,
                density: spec.density,
                scale: spec.scale,
                solid: spec.solid_colors.then(|| hue_color(i, spec.identities)),
            };
            next_seed = next_seed.wrapping_add(1);
            let pattern = gen_identity_pattern(&id)?;
            if out.iter().all(|(_, p)| pattern_difference(p, &pattern) >= MIN_PATTERN_DIFFERENCE) {
                out.push((id, pattern));
                break;
            }
            attempts += 1;
            if attempts > 1000 {
                return Err(SynthError::InvalidSpec(format!("could not find a distinct pattern for {label}")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64, density: f64) -> IdentitySpec {
        IdentitySpec { label: "c".into(), pattern_seed: seed, body_w: 48, body_h: 28, density, scale: 6, solid: None }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_identity_pattern(&spec(3, 0.4)).unwrap(), gen_identity_pattern(&spec(3, 0.4)).unwrap());
    }

    #[test]
    fn seeds_differ() {
        let a = gen_identity_pattern(&spec(1, 0.45)).unwrap();
        let b = gen_identity_pattern(&spec(2, 0.45)).unwrap();
        assert!(pattern_difference(&a, &b) >= MIN_PATTERN_DIFFERENCE);
    }

    #[test]
    fn zero_density_is_white() {
        let p = gen_identity_pattern(&spec(9, 0.0)).unwrap();
        assert!(p.pixels().all(|px| px.0 == WHITE));
    }

    #[test]
    fn herd_patterns_pairwise_distinct() {
        let herd = gen_herd(&HerdSpec::default(), 17).unwrap();
        assert_eq!(herd.len(), 20);
        for i in 0..herd.len() {
            for j in 0..i {
                assert!(pattern_difference(&herd[i].1, &herd[j].1) >= MIN_PATTERN_DIFFERENCE);
            }
        }
        let solid = gen_herd(&HerdSpec { solid_colors: true, ..HerdSpec::default() }, 0).unwrap();
        let colors: std::collections::HashSet<[u8; 3]> = solid.iter().map(|(s, _)| s.solid.unwrap()).collect();
        assert_eq!(colors.len(), 20);
    }
}
