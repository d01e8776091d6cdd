use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::resize_nearest;

/// Each augmentation can be switched off. Random draws happen regardless of the
/// switches, so toggling one augmentation never shifts another's randomness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub hflip: bool,
    pub rotate: bool,
    pub max_rotation_deg: f64,
    pub crop: bool,
    pub min_crop: f64,
    pub color: bool,
    pub brightness: f64,
    pub contrast: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            hflip: true,
            rotate: true,
            max_rotation_deg: 15.0,
            crop: true,
            min_crop: 0.8,
            color: true,
            brightness: 0.2,
            contrast: 0.2,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self { hflip: false, rotate: false, crop: false, color: false, ..Self::default() }
    }
}

pub fn hflip(img: &RgbImage) -> RgbImage {
    let w = img.width();
    RgbImage::from_fn(w, img.height(), |x, y| *img.get_pixel(w - 1 - x, y))
}

/// Nearest-neighbour rotation about the patch centre; uncovered pixels take `fill`.
fn rotate(img: &RgbImage, radians: f64, fill: [u8; 3]) -> RgbImage {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (s, c) = radians.sin_cos();
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let sx = c * dx + s * dy + cx;
        let sy = -s * dx + c * dy + cy;
        if sx >= 0.0 && sy >= 0.0 && sx < w && sy < h {
            *img.get_pixel(sx as u32, sy as u32)
        } else {
            Rgb(fill)
        }
    })
}

fn crop_resize(img: &RgbImage, scale: f64, fx: f64, fy: f64) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    let cw = ((w as f64 * scale).round() as u32).clamp(1, w);
    let ch = ((h as f64 * scale).round() as u32).clamp(1, h);
    let x0 = ((w - cw) as f64 * fx).floor() as u32;
    let y0 = ((h - ch) as f64 * fy).floor() as u32;
    let crop = image::imageops::crop_imm(img, x0, y0, cw, ch).to_image();
    resize_nearest(&crop, w, h)
}

fn color_jitter(img: &RgbImage, brightness: f64, contrast: f64) -> RgbImage {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for v in p.0.iter_mut() {
            let x = ((*v as f64 / 255.0 - 0.5) * (1.0 + contrast) + 0.5) * (1.0 + brightness);
            *v = (x.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    out
}

/// One random composition of flip, rotation, crop-and-resize and colour
/// jitter. `fill` paints pixels uncovered by rotation.
pub fn augment<R: Rng + ?Sized>(img: &RgbImage, cfg: &AugmentConfig, fill: [u8; 3], rng: &mut R) -> RgbImage {
    let flip = rng.gen_bool(0.5);
    let angle = rng.gen_range(-1.0..=1.0) * cfg.max_rotation_deg.to_radians();
    let scale = rng.gen_range(cfg.min_crop.min(1.0)..=1.0);
    let (fx, fy): (f64, f64) = (rng.gen(), rng.gen());
    let b = rng.gen_range(-1.0..=1.0) * cfg.brightness;
    let c = rng.gen_range(-1.0..=1.0) * cfg.contrast;

    let mut out = img.clone();
    if cfg.hflip && flip {
        out = hflip(&out);
    }
    if cfg.rotate && angle != 0.0 {
        out = rotate(&out, angle, fill);
    }
    if cfg.crop && scale < 1.0 {
        out = crop_resize(&out, scale, fx, fy);
    }
    if cfg.color {
        out = color_jitter(&out, b, c);
    }
    out
}
