//! Run-length encoded binary masks.
//!
//! Runs alternate background/foreground in row-major order and always start
//! with a background run (possibly of length zero). The canonical form has no
//! zero-length runs other than that leading one, and no trailing zero run.

use super::{Aabb, GeometryError};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl Mask {
    /// Builds a mask from run-length counts, canonicalizing them.
    pub fn from_runs(width: u32, height: u32, runs: &[u32]) -> Result<Self, GeometryError> {
        let total: u64 = runs.iter().map(|&r| r as u64).sum();
        let expected = width as u64 * height as u64;
        if total != expected {
            return Err(GeometryError::RunLength { expected, actual: total });
        }
        Ok(Self { width, height, runs: canonicalize(runs) })
    }

    /// Encodes a row-major bitmap of `width * height` entries.
    pub fn encode(width: u32, height: u32, bitmap: &[bool]) -> Result<Self, GeometryError> {
        let expected = width as u64 * height as u64;
        if bitmap.len() as u64 != expected {
            return Err(GeometryError::RunLength { expected, actual: bitmap.len() as u64 });
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &px in bitmap {
            if px != current {
                runs.push(count);
                count = 0;
                current = px;
            }
            count += 1;
        }
        runs.push(count);
        Ok(Self { width, height, runs: canonicalize(&runs) })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_runs(width, height, &[width * height]).expect("sum matches")
    }

    /// Mask covering the pixels inside `[x0,x1) x [y0,y1)`, clipped to the grid.
    pub fn from_rect(width: u32, height: u32, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        let mut bitmap = vec![false; width as usize * height as usize];
        let (cx0, cx1) = (x0.clamp(0, width as i64), x1.clamp(0, width as i64));
        let (cy0, cy1) = (y0.clamp(0, height as i64), y1.clamp(0, height as i64));
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                bitmap[y as usize * width as usize + x as usize] = true;
            }
        }
        Self::encode(width, height, &bitmap).expect("bitmap sized to grid")
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width as usize * self.height as usize);
        let mut fg = false;
        for &r in &self.runs {
            out.extend(std::iter::repeat_n(fg, r as usize));
            fg = !fg;
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Half-open foreground intervals over the row-major pixel index.
    pub fn foreground_intervals(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = pos;
            pos += r as u64;
            (i % 2 == 1 && r > 0).then_some((start, pos))
        })
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let idx = y as u64 * self.width as u64 + x as u64;
        self.foreground_intervals().any(|(s, e)| s <= idx && idx < e)
    }

    /// Foreground spans per row as `(y, x_start, x_end)` with `x_end` exclusive.
    pub fn row_spans(&self) -> Vec<(u32, u32, u32)> {
        let w = self.width as u64;
        let mut spans = Vec::new();
        for (mut s, e) in self.foreground_intervals() {
            while s < e {
                let row = s / w;
                let row_end = ((row + 1) * w).min(e);
                spans.push((row as u32, (s - row * w) as u32, (row_end - row * w) as u32));
                s = row_end;
            }
        }
        spans
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.row_spans()
            .into_iter()
            .flat_map(|(y, x0, x1)| (x0..x1).map(move |x| (x, y)))
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<u64, GeometryError> {
        self.check_dims(other)?;
        let a: Vec<_> = self.foreground_intervals().collect();
        let b: Vec<_> = other.foreground_intervals().collect();
        let (mut i, mut j, mut total) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                total += hi - lo;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(total)
    }

    fn check_dims(&self, other: &Mask) -> Result<(), GeometryError> {
        if self.width != other.width || self.height != other.height {
            return Err(GeometryError::DimensionMismatch {
                left: (self.width, self.height),
                right: (other.width, other.height),
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Mask, op: impl Fn(bool, bool) -> bool) -> Result<Mask, GeometryError> {
        self.check_dims(other)?;
        let bits: Vec<bool> = self.decode().into_iter().zip(other.decode()).map(|(a, b)| op(a, b)).collect();
        Mask::encode(self.width, self.height, &bits)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask, GeometryError> {
        self.combine(other, |a, b| a || b)
    }

    pub fn subtract(&self, other: &Mask) -> Result<Mask, GeometryError> {
        self.combine(other, |a, b| a && !b)
    }

    /// Shifts the foreground by `(dx, dy)`; pixels leaving the grid are lost.
    pub fn translate(&self, dx: i64, dy: i64) -> Mask {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut bits = vec![false; (w * h) as usize];
        for (x, y) in self.pixels() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if (0..w).contains(&nx) && (0..h).contains(&ny) {
                bits[(ny * w + nx) as usize] = true;
            }
        }
        Mask::encode(self.width, self.height, &bits).expect("sized to grid")
    }

    /// Keeps only foreground pixels for which `keep(x, y)` holds.
    pub fn filter(&self, keep: impl Fn(u32, u32) -> bool) -> Mask {
        let mut bits = vec![false; self.width as usize * self.height as usize];
        for (x, y) in self.pixels() {
            if keep(x, y) {
                bits[y as usize * self.width as usize + x as usize] = true;
            }
        }
        Mask::encode(self.width, self.height, &bits).expect("sized to grid")
    }

    /// Tight axis-aligned bounds of the foreground.
    pub fn to_aabb(&self) -> Result<Aabb, GeometryError> {
        let spans = self.row_spans();
        if spans.is_empty() {
            return Err(GeometryError::EmptyMask);
        }
        let y0 = spans.first().map(|s| s.0).unwrap();
        let y1 = spans.last().map(|s| s.0).unwrap() + 1;
        let x0 = spans.iter().map(|s| s.1).min().unwrap();
        let x1 = spans.iter().map(|s| s.2).max().unwrap();
        Ok(Aabb::new(x0 as f64, y0 as f64, (x1 - x0) as f64, (y1 - y0) as f64)
            .expect("nonempty foreground has positive extent"))
    }
}

fn canonicalize(runs: &[u32]) -> Vec<u32> {
    // Merge zero-length interior runs into their neighbours of the same parity.
    let mut out: Vec<u32> = Vec::with_capacity(runs.len());
    let mut fg = false;
    let mut out_fg = false; // parity of the last pushed run
    for &r in runs {
        if out.is_empty() {
            // leading background run, kept even when zero
            out.push(r);
            out_fg = false;
        } else if r > 0 {
            if out_fg == fg {
                *out.last_mut().unwrap() += r;
            } else {
                out.push(r);
                out_fg = fg;
            }
        }
        fg = !fg;
    }
    if out.is_empty() {
        out.push(0);
    }
    while out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_uniform_masks() {
        assert_eq!(Mask::encode(2, 2, &[false; 4]).unwrap().runs(), &[4]);
        assert_eq!(Mask::encode(2, 2, &[true; 4]).unwrap().runs(), &[0, 4]);
    }

    #[test]
    fn checkerboard_merges_interior_runs() {
        let m = Mask::encode(2, 2, &[false, true, true, false]).unwrap();
        assert_eq!(m.runs(), &[1, 2, 1]);
        let raw = Mask::from_runs(2, 2, &[1, 1, 0, 1, 1]).unwrap();
        assert_eq!(raw, m);
        assert_eq!(raw.decode(), vec![false, true, true, false]);
    }

    #[test]
    fn rejects_bad_run_sum() {
        assert!(matches!(
            Mask::from_runs(2, 2, &[1, 2]),
            Err(GeometryError::RunLength { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn zero_sized_grid() {
        let m = Mask::from_runs(0, 0, &[]).unwrap();
        assert_eq!(m.runs(), &[0]);
        assert!(m.is_empty());
    }

    #[test]
    fn aabb_of_pixels() {
        let full = Mask::from_rect(7, 5, 0, 0, 7, 5);
        assert_eq!(full.to_aabb().unwrap(), Aabb::new(0.0, 0.0, 7.0, 5.0).unwrap());
        let one = Mask::from_rect(10, 10, 3, 4, 4, 5);
        assert_eq!(one.to_aabb().unwrap(), Aabb::new(3.0, 4.0, 1.0, 1.0).unwrap());
        let two = one.union(&Mask::from_rect(10, 10, 7, 1, 9, 2)).unwrap();
        // min/max over pixel coordinates: x in {3,7,8}, y in {1,4}
        assert_eq!(two.to_aabb().unwrap(), Aabb::new(3.0, 1.0, 6.0, 4.0).unwrap());
        assert!(matches!(Mask::empty(3, 3).to_aabb(), Err(GeometryError::EmptyMask)));
    }

    #[test]
    fn row_spans_split_wrapping_runs() {
        let m = Mask::from_runs(3, 2, &[2, 3, 1]).unwrap();
        assert_eq!(m.row_spans(), vec![(0, 2, 3), (1, 0, 2)]);
        assert!(m.contains(2, 0) && m.contains(0, 1) && !m.contains(2, 1));
    }

    #[test]
    fn translate_clips_at_border() {
        let m = Mask::from_rect(5, 5, 3, 3, 5, 5);
        let t = m.translate(1, 0);
        assert_eq!(t.area(), 2);
        assert_eq!(t.to_aabb().unwrap(), Aabb::new(4.0, 3.0, 1.0, 2.0).unwrap());
    }
}
