use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::polygon::{convex_intersection, shoelace_area};
use super::GeometryError;

/// Axis-aligned box in pixel units, `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Aabb {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Aabb {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox(format!("[{x}, {y}, {w}, {h}]")));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn intersection_area(&self, other: &Aabb) -> f64 {
        overlap(self.x, self.w, other.x, other.w) * overlap(self.y, self.h, other.y, other.h)
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        (inter / (self.area() + other.area() - inter)).clamp(0.0, 1.0)
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x, self.y],
            [self.right(), self.y],
            [self.right(), self.bottom()],
            [self.x, self.bottom()],
        ]
    }

    pub fn to_obb(&self) -> Obb {
        Obb::new(self.x + self.w / 2.0, self.y + self.h / 2.0, self.w, self.h, 0.0)
            .expect("valid aabb gives valid obb")
    }
}

impl TryFrom<[f64; 4]> for Aabb {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        Aabb::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Aabb> for [f64; 4] {
    fn from(b: Aabb) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Length of `[a0, a0+alen) ∩ [b0, b0+blen)`. A nested interval reports its
/// own length, so a box intersected with itself has exactly its own area.
fn overlap(a0: f64, alen: f64, b0: f64, blen: f64) -> f64 {
    let (a1, b1) = (a0 + alen, b0 + blen);
    if b0 <= a0 && a1 <= b1 {
        alen
    } else if a0 <= b0 && b1 <= a1 {
        blen
    } else {
        (a1.min(b1) - a0.max(b0)).max(0.0)
    }
}

pub fn aabb_iou(a: &Aabb, b: &Aabb) -> f64 {
    a.iou(b)
}

/// Oriented box. `theta` rotates the width axis from +x towards +y (image
/// coordinates, y down) and is kept in `[-pi/2, pi/2)` with `w >= h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Obb {
    /// Builds a canonical OBB: the longer side becomes `w`, and theta is
    /// reduced into `[-pi/2, pi/2)`. Squares reduce theta into `[-pi/4, pi/4)`.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeometryError> {
        let finite = [cx, cy, w, h, theta].iter().all(|v| v.is_finite());
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox(format!("obb({cx}, {cy}, {w}, {h}, {theta})")));
        }
        let (w, h, theta) = if w < h { (h, w, theta + FRAC_PI_2) } else { (w, h, theta) };
        let theta = if w == h {
            wrap(theta, FRAC_PI_2, -FRAC_PI_4)
        } else {
            wrap(theta, PI, -FRAC_PI_2)
        };
        Ok(Self { cx, cy, w, h, theta })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Corner polygon in counter-clockwise order (for a y-up frame; the
    /// orientation is consistent, which is all clipping needs).
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        let pt = |u: f64, v: f64| [self.cx + u * c - v * s, self.cy + u * s + v * c];
        [pt(-hw, -hh), pt(hw, -hh), pt(hw, hh), pt(-hw, hh)]
    }
}

fn wrap(theta: f64, period: f64, lo: f64) -> f64 {
    let mut t = (theta - lo).rem_euclid(period) + lo;
    if t >= lo + period {
        t -= period;
    }
    t
}

pub fn obb_iou(a: &Obb, b: &Obb) -> f64 {
    let inter_poly = convex_intersection(&a.corners(), &b.corners());
    let inter = shoelace_area(&inter_poly).abs();
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
