use image::RgbImage;

use super::{EmbedError, EmbedderConfig};

/// Downsamples a `patch_size` square sample to `input_side` squared and scales
/// channels to [0, 1]. Layout is row-major, RGB interleaved. Block averaging is
/// used when the sizes divide evenly, nearest-neighbour otherwise.
pub fn extract_features(pixels: &RgbImage, cfg: &EmbedderConfig) -> Result<Vec<f64>, EmbedError> {
    let s = cfg.patch_size;
    if pixels.width() != s || pixels.height() != s {
        return Err(EmbedError::WrongResolution { expected: s, actual: (pixels.width(), pixels.height()) });
    }
    let t = cfg.input_side;
    let mut out = Vec::with_capacity((t * t * 3) as usize);
    if s.is_multiple_of(t) {
        let f = s / t;
        let norm = 255.0 * (f * f) as f64;
        for oy in 0..t {
            for ox in 0..t {
                let mut acc = [0u32; 3];
                for y in oy * f..(oy + 1) * f {
                    for x in ox * f..(ox + 1) * f {
                        let p = pixels.get_pixel(x, y).0;
                        for c in 0..3 {
                            acc[c] += p[c] as u32;
                        }
                    }
                }
                out.extend(acc.iter().map(|&a| a as f64 / norm));
            }
        }
    } else {
        let small = crate::ingest::resize_nearest(pixels, t, t);
        out.extend(small.pixels().flat_map(|p| p.0).map(|v| v as f64 / 255.0));
    }
    Ok(out)
}
