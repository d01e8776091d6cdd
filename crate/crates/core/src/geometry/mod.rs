//! Exact geometry kernel: RLE masks, axis-aligned and oriented boxes, and
//! the IoU variants used by localisation evaluation.
//!
//! All functions are pure.

mod boxes;
mod mask;
mod obb_fit;
pub mod polygon;

pub use boxes::{aabb_iou, obb_iou, Aabb, Obb};
pub use mask::Mask;
pub use obb_fit::min_area_obb;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("run lengths sum to {actual}, expected {expected}")]
    RunLength { expected: u64, actual: u64 },
    #[error("mask dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("both masks are empty; IoU is undefined")]
    EmptyPair,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("invalid box {0}")]
    InvalidBox(String),
}

/// Foreground-pixel IoU of two masks on the same grid.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64, GeometryError> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Err(GeometryError::EmptyPair);
    }
    Ok(inter as f64 / union as f64)
}

pub fn mask_to_aabb(m: &Mask) -> Result<Aabb, GeometryError> {
    m.to_aabb()
}
