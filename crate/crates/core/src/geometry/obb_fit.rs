//! Minimum-area enclosing rectangle of a mask's foreground.
//!
//! Pixel `(x, y)` covers the unit square `[x, x+1) x [y, y+1)`, so the hull is
//! built over integer pixel corners and every quantity up to the final
//! normalisation is exact integer arithmetic.

use super::{GeometryError, Mask, Obb};

type IPoint = (i64, i64);

fn cross(o: IPoint, a: IPoint, b: IPoint) -> i128 {
    (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
}

/// Corner points that can lie on the hull: the four corners of each row
/// span's outermost pixels.
fn candidate_corners(mask: &Mask) -> Vec<IPoint> {
    let mut pts = Vec::new();
    for (y, x0, x1) in mask.row_spans() {
        let (y, x0, x1) = (y as i64, x0 as i64, x1 as i64);
        pts.extend_from_slice(&[(x0, y), (x1, y), (x0, y + 1), (x1, y + 1)]);
    }
    pts
}

/// Andrew's monotone chain; counter-clockwise (positive cross), collinear
/// points dropped.
pub(crate) fn convex_hull(mut pts: Vec<IPoint>) -> Vec<IPoint> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<IPoint> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub(crate) fn mask_hull(mask: &Mask) -> Vec<IPoint> {
    convex_hull(candidate_corners(mask))
}

#[derive(Clone, Copy)]
struct Candidate {
    edge: usize,
    num: i128,
    den: i128,
}

pub fn min_area_obb(mask: &Mask) -> Result<Obb, GeometryError> {
    if mask.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    let hull = mask_hull(mask);
    // A nonempty pixel set always has at least a unit square of hull.
    debug_assert!(hull.len() >= 4);
    let n = hull.len();
    let next = |i: usize| (i + 1) % n;
    let edge = |i: usize| {
        let (a, b) = (hull[i], hull[next(i)]);
        ((b.0 - a.0) as i128, (b.1 - a.1) as i128)
    };
    let dot = |e: (i128, i128), p: IPoint| e.0 * p.0 as i128 + e.1 * p.1 as i128;
    let height = |i: usize, p: IPoint| cross(hull[i], hull[next(i)], p);

    // Rotating calipers: the farthest-along, farthest-behind and farthest-from
    // edge vertices each advance monotonically as the edge turns.
    let e0 = edge(0);
    let mut hi = (0..n).max_by_key(|&k| dot(e0, hull[k])).unwrap();
    let mut lo = (0..n).min_by_key(|&k| dot(e0, hull[k])).unwrap();
    let mut far = (0..n).max_by_key(|&k| height(0, hull[k])).unwrap();
    let mut best: Option<Candidate> = None;
    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        let e = edge(i);
        for _ in 0..n {
            if dot(e, hull[next(hi)]) >= dot(e, hull[hi]) && next(hi) != hi {
                hi = next(hi);
            } else {
                break;
            }
        }
        for _ in 0..n {
            if height(i, hull[next(far)]) >= height(i, hull[far]) {
                far = next(far);
            } else {
                break;
            }
        }
        for _ in 0..n {
            if dot(e, hull[next(lo)]) <= dot(e, hull[lo]) {
                lo = next(lo);
            } else {
                break;
            }
        }
        let span = dot(e, hull[hi]) - dot(e, hull[lo]);
        let h = height(i, hull[far]);
        let len2 = e.0 * e.0 + e.1 * e.1;
        let cand = Candidate { edge: i, num: span * h, den: len2 };
        candidates.push((cand, hi, lo, far));
        best = match best {
            Some(b) if b.num * cand.den <= cand.num * b.den => Some(b),
            _ => Some(cand),
        };
    }
    let best = best.unwrap();

    // Among equal-area fits prefer the smallest |theta|, then the smaller theta.
    let mut chosen: Option<Obb> = None;
    for (cand, hi, lo, far) in candidates {
        if cand.num * best.den != best.num * cand.den {
            continue;
        }
        let obb = build_obb(&hull, cand.edge, hi, lo, far);
        chosen = match chosen {
            Some(c) if (c.theta.abs(), c.theta) <= (obb.theta.abs(), obb.theta) => Some(c),
            _ => Some(obb),
        };
    }
    Ok(chosen.unwrap())
}

fn build_obb(hull: &[IPoint], i: usize, hi: usize, lo: usize, far: usize) -> Obb {
    let n = hull.len();
    let a = hull[i];
    let b = hull[(i + 1) % n];
    let (ex, ey) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
    let len = ex.hypot(ey);
    let u = [ex / len, ey / len];
    let v = [-u[1], u[0]];
    let proj = |p: IPoint, axis: [f64; 2]| p.0 as f64 * axis[0] + p.1 as f64 * axis[1];
    let s_max = proj(hull[hi], u);
    let s_min = proj(hull[lo], u);
    let t0 = proj(a, v);
    let t1 = proj(hull[far], v);
    let (sm, tm) = ((s_min + s_max) / 2.0, (t0 + t1) / 2.0);
    let cx = u[0] * sm + v[0] * tm;
    let cy = u[1] * sm + v[1] * tm;
    Obb::new(cx, cy, s_max - s_min, (t1 - t0).abs(), u[1].atan2(u[0])).expect("hull has positive extent")
}
