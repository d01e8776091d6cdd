//! Acceptance suite. Each criterion runs against an oracle written here,
//! independently of the library code it checks, and prints one PASS/FAIL
//! line. Pass a substring (e.g. `c7`) to run a subset.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dazzle_reid::embedder::{ntxent_grad, ntxent_loss, Activation, EmbedderConfig, EmbedderModel};
use dazzle_reid::geometry::{aabb_iou, mask_iou, min_area_obb, obb_iou, Aabb, Mask, Obb};
use dazzle_reid::ingest::{Annotation, AnnotationSet, DetectionSet, FrameAnnotations, FrameDetections, FrameInfo, RgbMaskSample};
use dazzle_reid::loceval::{evaluate_clip, GeometryMode, LocEvalConfig, MatchingRateMode, TpAccuracyMode};
use dazzle_reid::pipeline::{samples_from_annotations, samples_from_detections, SampleConfig};
use dazzle_reid::refine::{area_ratio_filter, nms, Detection, RefineConfig};
use dazzle_reid::reideval::{
    ami, ari, hungarian_accuracy, hungarian_assign, make_fold_plan, nmi, run_protocol, ClusteringReport, FoldMode, MetricSet,
    Partition, ProtocolConfig,
};
use dazzle_reid::synth::{annotations_as_detections, corrupt, gen_corpus, Corpus, CorpusSpec, CorruptionSpec, HerdSpec, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- geometry

/// Side of the square raster the box oracles count pixel centres on.
const RASTER: usize = 16384;

/// Horizontal extent of a convex polygon along the line `y = yc`.
fn row_extent(poly: &[[f64; 2]], yc: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
        if yc < y0 || yc > y1 || y0 == y1 {
            continue;
        }
        let x = a[0] + (yc - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Pixel centres `i + 0.5` inside `[lo, hi]`.
fn centres_in(lo: f64, hi: f64) -> u64 {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(RASTER as f64 - 1.0);
    if last < first {
        0
    } else {
        (last - first) as u64 + 1
    }
}

/// IoU by counting raster pixel centres covered by each convex polygon.
fn raster_iou(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (mut na, mut nb, mut ni) = (0u64, 0u64, 0u64);
    for row in 0..RASTER {
        let yc = row as f64 + 0.5;
        let ea = row_extent(a, yc);
        let eb = row_extent(b, yc);
        if let Some((l, h)) = ea {
            na += centres_in(l, h);
        }
        if let Some((l, h)) = eb {
            nb += centres_in(l, h);
        }
        if let (Some(x), Some(y)) = (ea, eb) {
            ni += centres_in(x.0.max(y.0), x.1.min(y.1));
        }
    }
    ni as f64 / (na + nb - ni) as f64
}

fn rect_corners(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> [[f64; 2]; 4] {
    let (s, c) = theta.sin_cos();
    let p = |u: f64, v: f64| [cx + u * c - v * s, cy + u * s + v * c];
    [p(-w / 2.0, -h / 2.0), p(w / 2.0, -h / 2.0), p(w / 2.0, h / 2.0), p(-w / 2.0, h / 2.0)]
}

/// Random bitmap: a union of one to three ellipses with random axes and tilt.
fn blob_bitmap(rng: &mut ChaCha8Rng, w: usize, h: usize, min_r: f64, max_r: f64) -> Vec<bool> {
    let mut bits = vec![false; w * h];
    let n = rng.gen_range(1..=3);
    let (cx0, cy0) = (rng.gen_range(0.3..0.7) * w as f64, rng.gen_range(0.3..0.7) * h as f64);
    for _ in 0..n {
        let cx = cx0 + rng.gen_range(-max_r..max_r) * 0.5;
        let cy = cy0 + rng.gen_range(-max_r..max_r) * 0.5;
        let (ra, rb) = (rng.gen_range(min_r..max_r), rng.gen_range(min_r..max_r));
        let (s, c) = rng.gen_range(0.0..PI).sin_cos();
        let reach = ra.max(rb).ceil() as i64 + 1;
        for y in (cy as i64 - reach).max(0)..(cy as i64 + reach).min(h as i64) {
            for x in (cx as i64 - reach).max(0)..(cx as i64 + reach).min(w as i64) {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let (u, v) = (dx * c + dy * s, -dx * s + dy * c);
                if (u / ra).powi(2) + (v / rb).powi(2) <= 1.0 {
                    bits[y as usize * w + x as usize] = true;
                }
            }
        }
    }
    bits
}

/// Corners of foreground pixels that touch background or the image border;
/// every hull vertex is among them.
fn boundary_corners(bits: &[bool], w: usize, h: usize) -> Vec<[f64; 2]> {
    let on = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && bits[y as usize * w + x as usize];
    let mut pts = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if on(x, y) && !(on(x - 1, y) && on(x + 1, y) && on(x, y - 1) && on(x, y + 1)) {
                let (fx, fy) = (x as f64, y as f64);
                pts.extend_from_slice(&[[fx, fy], [fx + 1.0, fy], [fx, fy + 1.0], [fx + 1.0, fy + 1.0]]);
            }
        }
    }
    pts
}

/// Area of the tightest rectangle at orientation `deg` degrees.
fn rect_area_at(pts: &[[f64; 2]], deg: f64) -> f64 {
    let (s, c) = deg.to_radians().sin_cos();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let u = p[0] * c + p[1] * s;
        let v = -p[0] * s + p[1] * c;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    (u1 - u0) * (v1 - v0)
}

/// Angle sweep at 1 degree over a quarter turn, then progressively finer
/// sweeps around the best coarse angles.
fn sweep_min_area(pts: &[[f64; 2]]) -> f64 {
    let mut coarse: Vec<(f64, f64)> = (0..90).map(|d| (rect_area_at(pts, d as f64), d as f64)).collect();
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0));
    let refine = |centre: f64, half: f64, step: f64| -> (f64, f64) {
        let n = (2.0 * half / step).round() as i64;
        (0..=n)
            .map(|k| {
                let a = centre - half + k as f64 * step;
                (rect_area_at(pts, a), a)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    };
    let mut best = coarse[0];
    for &(_, angle) in coarse.iter().take(4) {
        let mut b = refine(angle, 1.0, 0.01);
        b = refine(b.1, 0.01, 1e-5);
        b = refine(b.1, 1e-5, 1e-8);
        if b.0 < best.0 {
            best = b;
        }
    }
    best.0
}

fn obb_contains(obb: &Obb, p: [f64; 2]) -> bool {
    let (s, c) = obb.theta.sin_cos();
    let (dx, dy) = (p[0] - obb.cx, p[1] - obb.cy);
    let tol = 1e-7 * obb.w.max(1.0);
    (dx * c + dy * s).abs() <= obb.w / 2.0 + tol && (-dx * s + dy * c).abs() <= obb.h / 2.0 + tol
}

fn c1_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let r = RASTER as f64;
    let mut worst = [0.0f64; 3];

    for i in 0..1000 {
        let draw = |rng: &mut ChaCha8Rng| {
            let (w, h) = (rng.gen_range(0.1..0.4) * r, rng.gen_range(0.1..0.4) * r);
            (rng.gen_range(0.0..r - w), rng.gen_range(0.0..r - h), w, h)
        };
        let (ax, ay, aw, ah) = draw(&mut rng);
        let (bx, by, bw, bh) = if i % 2 == 0 {
            draw(&mut rng)
        } else {
            // overlapping by construction
            let (w, h) = (aw * rng.gen_range(0.5..1.5), ah * rng.gen_range(0.5..1.5));
            let x = (ax + rng.gen_range(-0.5..0.5) * aw).clamp(0.0, r - w);
            let y = (ay + rng.gen_range(-0.5..0.5) * ah).clamp(0.0, r - h);
            (x, y, w, h)
        };
        let got = aabb_iou(&Aabb::new(ax, ay, aw, ah).unwrap(), &Aabb::new(bx, by, bw, bh).unwrap());
        let want = raster_iou(&rect_corners(ax + aw / 2.0, ay + ah / 2.0, aw, ah, 0.0), &rect_corners(bx + bw / 2.0, by + bh / 2.0, bw, bh, 0.0));
        worst[0] = worst[0].max((got - want).abs());
    }

    for _ in 0..1000 {
        let a = (rng.gen_range(0.35..0.65) * r, rng.gen_range(0.35..0.65) * r, rng.gen_range(0.05..0.3) * r, rng.gen_range(0.05..0.3) * r, rng.gen_range(-PI..PI));
        let b = (
            a.0 + rng.gen_range(-0.15..0.15) * r,
            a.1 + rng.gen_range(-0.15..0.15) * r,
            rng.gen_range(0.05..0.3) * r,
            rng.gen_range(0.05..0.3) * r,
            rng.gen_range(-PI..PI),
        );
        let got = obb_iou(&Obb::new(a.0, a.1, a.2, a.3, a.4).unwrap(), &Obb::new(b.0, b.1, b.2, b.3, b.4).unwrap());
        let want = raster_iou(&rect_corners(a.0, a.1, a.2, a.3, a.4), &rect_corners(b.0, b.1, b.2, b.3, b.4));
        worst[1] = worst[1].max((got - want).abs());
    }

    let side = 1024;
    for _ in 0..1000 {
        let a = blob_bitmap(&mut rng, side, side, 40.0, 260.0);
        let b = blob_bitmap(&mut rng, side, side, 40.0, 260.0);
        let (mut na, mut nb, mut ni) = (0u64, 0u64, 0u64);
        for (&x, &y) in a.iter().zip(&b) {
            na += x as u64;
            nb += y as u64;
            ni += (x && y) as u64;
        }
        let want = ni as f64 / (na + nb - ni) as f64;
        let got = mask_iou(&Mask::encode(side as u32, side as u32, &a).unwrap(), &Mask::encode(side as u32, side as u32, &b).unwrap()).unwrap();
        worst[2] = worst[2].max((got - want).abs());
    }

    let mut worst_obb = 0.0f64;
    let mut enclosing = true;
    for _ in 0..200 {
        let (w, h) = (96, 96);
        let bits = blob_bitmap(&mut rng, w, h, 3.0, 30.0);
        let pts = boundary_corners(&bits, w, h);
        let obb = min_area_obb(&Mask::encode(w as u32, h as u32, &bits).unwrap()).unwrap();
        let want = sweep_min_area(&pts);
        worst_obb = worst_obb.max((obb.area() - want).abs() / want);
        enclosing &= pts.iter().all(|&p| obb_contains(&obb, p));
    }

    let detail = format!(
        "max |IoU - raster| aabb {:.1e}, obb {:.1e}, mask {:.1e}; min-area obb rel err {:.1e}, encloses all pixels: {enclosing}",
        worst[0], worst[1], worst[2], worst_obb
    );
    check(worst.iter().all(|&e| e <= 1e-3) && worst_obb <= 1e-6 && enclosing, detail)
}

// -------------------------------------------------------------- assignment

/// Exhaustive search over injective row-to-column maps (rows <= columns).
/// Returns the minimum cost and the lexicographically first optimal map.
fn brute_assign(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        if row == cost.len() {
            let total: f64 = cur.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            // columns are tried in increasing order, so the first optimum found is lexicographically smallest
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, cur.clone()));
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                go(cost, row + 1, used, cur, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = None;
    go(cost, 0, &mut vec![false; cost[0].len()], &mut Vec::new(), &mut best);
    best.unwrap()
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

fn c2_assignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    let mut lex_checked = 0;
    for trial in 0..1000 {
        let (n, m) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
        let integer = trial % 10 < 7;
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| if integer { rng.gen_range(0..12) as f64 } else { rng.gen_range(-5.0..5.0) }).collect())
            .collect();
        let got = hungarian_assign(&cost).unwrap();
        let recomputed: f64 = got.pairs().map(|(r, c)| cost[r][c]).sum();
        let mut cols: Vec<usize> = got.pairs().map(|(_, c)| c).collect();
        cols.sort_unstable();
        cols.dedup();
        let valid = got.pairs().count() == n.min(m) && cols.len() == n.min(m) && recomputed == got.total_cost;

        // the brute-force optimum, summed in row order like the solver's total
        let (want, lex) = if n <= m {
            brute_assign(&cost)
        } else {
            let (_, row_of_col) = brute_assign(&transpose(&cost));
            let mut pairs: Vec<(usize, usize)> = row_of_col.iter().enumerate().map(|(c, &r)| (r, c)).collect();
            pairs.sort_unstable();
            (pairs.iter().map(|&(r, c)| cost[r][c]).sum(), Vec::new())
        };
        let mut ok = valid && got.total_cost == want;
        if n == m {
            lex_checked += 1;
            let seq: Vec<usize> = got.row_to_col.iter().map(|c| c.unwrap()).collect();
            ok &= seq == lex;
        }
        if !ok {
            failures.push(format!("trial {trial} ({n}x{m}): got {} want {want}", got.total_cost));
        }
    }
    check(
        failures.is_empty(),
        match failures.first() {
            None => format!("1000 matrices up to 7x7, 0 mismatches, lexicographic choice checked on {lex_checked} square ones"),
            Some(first) => format!("{} mismatches, first: {first:?}", failures.len()),
        },
    )
}

// -------------------------------------------------------------- clustering

fn table(a: &[usize], b: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut t = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        t[x][y] += 1.0;
    }
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum::<f64>()).filter(|&s| s > 0.0).collect();
    let cols: Vec<f64> = (0..kb).map(|j| t.iter().map(|r| r[j]).sum::<f64>()).filter(|&s| s > 0.0).collect();
    (t, rows, cols)
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

fn factorial(k: f64) -> f64 {
    (1..=k as u64).map(|v| v as f64).product()
}

fn oracle_ari(a: &[usize], b: &[usize]) -> f64 {
    let (t, rows, cols) = table(a, b);
    let index: f64 = t.iter().flatten().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(a.len() as f64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn oracle_entropy(counts: &[f64], n: f64) -> f64 {
    -counts.iter().map(|&c| c / n * (c / n).ln()).sum::<f64>()
}

fn oracle_mi(t: &[Vec<f64>], n: f64) -> f64 {
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, r) in t.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0.0 {
                mi += c / n * (c * n / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

fn oracle_nmi(a: &[usize], b: &[usize]) -> f64 {
    let (t, rows, cols) = table(a, b);
    if rows.len() == 1 && cols.len() == 1 {
        return 1.0;
    }
    let n = a.len() as f64;
    oracle_mi(&t, n) / ((oracle_entropy(&rows, n) + oracle_entropy(&cols, n)) / 2.0)
}

/// Expected MI under the hypergeometric model, using plain factorials.
fn oracle_emi(rows: &[f64], cols: &[f64], n: f64) -> f64 {
    let mut emi = 0.0;
    for &ai in rows {
        for &bj in cols {
            let lo = (ai + bj - n).max(1.0);
            let mut nij = lo;
            while nij <= ai.min(bj) {
                let p = factorial(ai) * factorial(bj) / factorial(n) * factorial(n - ai) / factorial(nij) * factorial(n - bj)
                    / factorial(ai - nij)
                    / factorial(bj - nij)
                    / factorial(n - ai - bj + nij);
                emi += nij / n * (n * nij / (ai * bj)).ln() * p;
                nij += 1.0;
            }
        }
    }
    emi
}

fn oracle_ami(a: &[usize], b: &[usize]) -> f64 {
    let (t, rows, cols) = table(a, b);
    let n = a.len() as f64;
    if rows.len() == cols.len() && (rows.len() == 1 || rows.len() == a.len()) {
        return 1.0;
    }
    let emi = oracle_emi(&rows, &cols, n);
    let mean_h = (oracle_entropy(&rows, n) + oracle_entropy(&cols, n)) / 2.0;
    (oracle_mi(&t, n) - emi) / (mean_h - emi)
}

/// Best one-to-one cluster-to-label agreement by exhaustive search.
fn oracle_ha(truth: &[usize], clusters: &[usize]) -> f64 {
    let (t, _, _) = table(clusters, truth);
    let (rows, cols) = (t.len(), t[0].len());
    let m = if rows <= cols { t.clone() } else { transpose(&t) };
    let neg: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    -brute_assign(&neg).0 / truth.len() as f64
}

fn c3_clustering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = [0.0f64; 4];
    for _ in 0..500 {
        let n = rng.gen_range(2..=30);
        let (ka, kb) = (rng.gen_range(1..=6usize.min(n)), rng.gen_range(1..=6usize.min(n)));
        // relabel to dense ids so the oracle's tables have no empty rows
        let dense = |raw: Vec<usize>| -> Vec<usize> {
            let mut map = HashMap::new();
            raw.into_iter().map(|v| { let next = map.len(); *map.entry(v).or_insert(next) }).collect()
        };
        let a = dense((0..n).map(|_| rng.gen_range(0..ka)).collect());
        let b = if rng.gen_bool(0.2) { a.clone() } else { dense((0..n).map(|_| rng.gen_range(0..kb)).collect()) };
        let (pa, pb) = (Partition::from_labels(&a), Partition::from_labels(&b));
        let got = [ari(&pa, &pb).unwrap(), ami(&pa, &pb).unwrap(), nmi(&pa, &pb).unwrap(), hungarian_accuracy(&pa, &pb).unwrap()];
        let want = [oracle_ari(&a, &b), oracle_ami(&a, &b), oracle_nmi(&a, &b), oracle_ha(&a, &b)];
        for k in 0..4 {
            worst[k] = worst[k].max((got[k] - want[k]).abs());
        }
    }
    let example = ari(&Partition::from_labels(&[0, 0, 1, 1]), &Partition::from_labels(&[0, 1, 0, 1])).unwrap();
    check(
        worst.iter().all(|&e| e <= 1e-9) && example == -0.5,
        format!("max deviation ari {:.1e}, ami {:.1e}, nmi {:.1e}, ha {:.1e}; ARI([0,0,1,1],[0,1,0,1]) = {example}", worst[0], worst[1], worst[2], worst[3]),
    )
}

// ---------------------------------------------------------------- gradient

fn batch_loss(model: &EmbedderModel, feats: &[Vec<f64>], tau: f64) -> f64 {
    let emb: Vec<Vec<f64>> = feats.iter().map(|x| model.forward(x).unwrap()).collect();
    ntxent_loss(&emb, tau).unwrap()
}

fn c4_gradient() -> Outcome {
    let cfg = EmbedderConfig { patch_size: 4, input_side: 2, hidden: 8, dim: 5, activation: Activation::Tanh };
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for point in 0..100 {
        let mut model = EmbedderModel::init(cfg, 1000 + point).unwrap();
        let rows = 2 * rng.gen_range(2..=4);
        let feats: Vec<Vec<f64>> = (0..rows).map(|_| (0..cfg.input_len()).map(|_| rng.gen()).collect()).collect();
        let tau = rng.gen_range(0.2..1.0);
        let (_, grads) = ntxent_grad(&model, &feats, tau).unwrap();
        let analytic = grads.flat();
        let mut numeric = Vec::with_capacity(analytic.len());
        for part in 0..4 {
            for j in 0..model.params()[part].len() {
                let orig = model.params()[part][j];
                model.params_mut()[part][j] = orig + eps;
                let up = batch_loss(&model, &feats, tau);
                model.params_mut()[part][j] = orig - eps;
                let down = batch_loss(&model, &feats, tau);
                model.params_mut()[part][j] = orig;
                numeric.push((up - down) / (2.0 * eps));
            }
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric));
        worst = worst.max(rel);
    }
    check(worst <= 1e-4, format!("100 random points, worst relative error |g - g_fd| / |g| = {worst:.2e}"))
}

// ------------------------------------------------------ localisation metrics

const SIDE: u32 = 64;

fn rect_ann(identity: &str, x: i64, y: i64, w: i64, h: i64) -> Annotation {
    Annotation {
        bbox: Aabb::new(x as f64, y as f64, w as f64, h as f64).unwrap(),
        mask: Mask::from_rect(SIDE, SIDE, x, y, x + w, y + h),
        identity: identity.into(),
        track_id: identity.into(),
    }
}

fn rect_det(frame: &str, track: &str, x: i64, y: i64, w: i64, h: i64) -> Detection {
    let mut d = Detection::new(frame, Aabb::new(x as f64, y as f64, w as f64, h as f64).unwrap(), 0.9);
    d.mask = Some(Mask::from_rect(SIDE, SIDE, x, y, x + w, y + h));
    d.track_id = Some(track.into());
    d
}

fn small_corpus(days: usize, frames: usize, overlap: f64, solid: bool, seed: u64) -> Corpus {
    let spec = CorpusSpec {
        days,
        herd: HerdSpec { solid_colors: solid, ..HerdSpec::default() },
        scene: SceneSpec { frames, overlap, ..SceneSpec::default() },
        ..CorpusSpec::default()
    };
    gen_corpus(&spec, seed).unwrap()
}

fn c5_metric_definitions() -> Outcome {
    // IoUs by frame: A 1, B 3/4 | A 1/4, B missed, one spurious | A 1, B 3/4, one spurious
    let gt = AnnotationSet {
        frames: (0..3)
            .map(|f| FrameAnnotations { frame_id: format!("f{f}"), annotations: vec![rect_ann("A", 0, 0, 16, 16), rect_ann("B", 32, 32, 16, 16)] })
            .collect(),
    };
    let dets = DetectionSet {
        frames: vec![
            FrameDetections { frame_id: "f0".into(), detections: vec![rect_det("f0", "ta", 0, 0, 16, 16), rect_det("f0", "tb", 32, 32, 16, 12)] },
            FrameDetections { frame_id: "f1".into(), detections: vec![rect_det("f1", "ta", 0, 0, 16, 4), rect_det("f1", "tx", 50, 0, 8, 8)] },
            FrameDetections {
                frame_id: "f2".into(),
                detections: vec![rect_det("f2", "ta", 0, 0, 16, 16), rect_det("f2", "tb", 32, 32, 16, 12), rect_det("f2", "tx", 50, 0, 8, 8)],
            },
        ],
    };
    // by hand: 6 GT, 7 detections, 4 pairs above 0.7, IoU total 3.75;
    // A averages (1 + 1/4 + 1) / 3 = 0.75 and clears 0.7, B averages 0.5
    let a_avg = (1.0 + 0.25 + 1.0) / 3.0;
    let mut mismatches = Vec::new();
    for mode in [GeometryMode::Aabb, GeometryMode::Mask] {
        let gt_side = evaluate_clip(&gt, &dets, mode, &LocEvalConfig::default()).unwrap();
        let want = [3.75 / 6.0, 0.5, 4.0 / 7.0, 4.0 / 6.0];
        let got = [gt_side.mean_iou, gt_side.tp_accuracy, gt_side.usage_rate.unwrap(), gt_side.matching_rate];
        if got != want {
            mismatches.push(format!("{mode:?}: {got:?} != {want:?}"));
        }
        let alt = LocEvalConfig { tp_accuracy: TpAccuracyMode::WellDetectedMeanIou, matching_rate: MatchingRateMode::Detections, ..LocEvalConfig::default() };
        let r = evaluate_clip(&gt, &dets, mode, &alt).unwrap();
        if r.tp_accuracy != a_avg || r.matching_rate != 4.0 / 7.0 {
            mismatches.push(format!("{mode:?} alternate readings: tp {} matching {}", r.tp_accuracy, r.matching_rate));
        }
    }

    let corpus = small_corpus(1, 6, 0.3, false, 55);
    let perfect = annotations_as_detections(&corpus.annotations);
    for mode in [GeometryMode::Aabb, GeometryMode::Obb, GeometryMode::Mask] {
        let r = evaluate_clip(&corpus.annotations, &perfect, mode, &LocEvalConfig::default()).unwrap();
        let got = [r.mean_iou, r.tp_accuracy, r.usage_rate.unwrap_or(0.0), r.matching_rate];
        if got != [1.0; 4] {
            mismatches.push(format!("GT as detections, {mode:?}: {got:?}"));
        }
    }
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "hand clip: mean IoU 0.625, TP 0.5, usage 4/7, matching 4/6 in aabb and mask modes; GT as detections gives 1.0 everywhere".into()
        } else {
            mismatches.join("; ")
        },
    )
}

// ------------------------------------------------------------ monotonicity

fn c6_monotonicity() -> Outcome {
    let corpus = small_corpus(1, 10, 0.5, false, 66);
    let mut lines = Vec::new();
    let mut ok = true;
    for mode in [GeometryMode::Obb, GeometryMode::Mask] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        let mut series = Vec::new();
        for sigma in [0.0, 2.0, 4.0, 8.0] {
            let dets = corrupt(&corpus.annotations, &CorruptionSpec { jitter_sigma: sigma, ..CorruptionSpec::default() }, 9).unwrap();
            let r = evaluate_clip(&corpus.annotations, &dets, mode, &LocEvalConfig::default()).unwrap();
            ok &= r.mean_iou <= prev.0 && r.matching_rate <= prev.1;
            prev = (r.mean_iou, r.matching_rate);
            series.push(format!("{:.3}/{:.3}", r.mean_iou, r.matching_rate));
        }
        let dropped = corrupt(&corpus.annotations, &CorruptionSpec { drop_rate: 1.0, ..CorruptionSpec::default() }, 9).unwrap();
        let r = evaluate_clip(&corpus.annotations, &dropped, mode, &LocEvalConfig::default()).unwrap();
        ok &= r.matching_rate == 0.0;
        lines.push(format!("{} IoU/matching over sigma 0,2,4,8: {}; drop-all matching {}", mode.as_str(), series.join(" "), r.matching_rate));
    }
    check(ok, lines.join("; "))
}

// ------------------------------------------------------------- end to end

fn corpus_samples(corpus: &Corpus, dets: Option<&DetectionSet>) -> Vec<RgbMaskSample> {
    let index: HashMap<String, usize> = corpus.manifest.frames().enumerate().map(|(i, (_, f))| (f.frame_id.clone(), i)).collect();
    let load = |f: &FrameInfo| Ok(corpus.images[index[&f.frame_id]].clone());
    let cfg = SampleConfig::default();
    match dets {
        Some(d) => samples_from_detections(&corpus.manifest, d, Some(&corpus.annotations), &cfg, load).unwrap(),
        None => samples_from_annotations(&corpus.manifest, &corpus.annotations, &cfg, load).unwrap(),
    }
}

fn protocol(samples: &[RgbMaskSample], mode: FoldMode, seed: u64) -> ClusteringReport {
    let days: Vec<_> = samples.iter().map(|s| s.day_id).collect();
    let plan = make_fold_plan(&days, mode, seed).unwrap();
    let mut cfg = ProtocolConfig::default();
    cfg.train.seed = seed;
    run_protocol(samples, &plan, &cfg).unwrap()
}

fn fmt_metrics(m: &MetricSet) -> String {
    MetricSet::NAMES.iter().zip(m.values()).map(|(n, v)| format!("{n} {v:.4}")).collect::<Vec<_>>().join(", ")
}

fn c7_day_wise() -> Outcome {
    let patterned = small_corpus(9, 6, 0.2, false, 7);
    let dets = corrupt(&patterned.annotations, &CorruptionSpec { jitter_sigma: 2.0, drop_rate: 0.05, ..CorruptionSpec::default() }, 1).unwrap();
    let noisy = protocol(&corpus_samples(&patterned, Some(&dets)), FoldMode::DayWiseK9, 0);

    let solid = small_corpus(9, 6, 0.2, true, 7);
    let clean = protocol(&corpus_samples(&solid, None), FoldMode::DayWiseK9, 0);
    check(
        noisy.folds.len() == 9 && noisy.mean.knn_accuracy >= 0.95 && clean.mean.knn_accuracy == 1.0,
        format!(
            "patterned + sigma 2 / drop 5%: kNN {:.4} ± {:.4} over {} folds; solid colours: kNN {:.4}",
            noisy.mean.knn_accuracy,
            noisy.std.knn_accuracy,
            noisy.folds.len(),
            clean.mean.knn_accuracy
        ),
    )
}

fn c8_within_day() -> Outcome {
    let corpus = small_corpus(1, 60, 0.2, false, 8);
    let clean = protocol(&corpus_samples(&corpus, None), FoldMode::WithinDayK5, 1);
    let spec = CorruptionSpec { jitter_sigma: 4.0, drop_rate: 0.05, split_rate: 0.1, merge_rate: 0.1, ..CorruptionSpec::default() };
    let dets = corrupt(&corpus.annotations, &spec, 2).unwrap();
    let noisy = protocol(&corpus_samples(&corpus, Some(&dets)), FoldMode::WithinDayK5, 1);
    let (c, n) = (clean.mean.values(), noisy.mean.values());
    let ok = clean.folds.len() == 5 && c[1..].iter().all(|&v| v >= 0.9) && c.iter().zip(&n).all(|(a, b)| a > b);
    check(ok, format!("clean: {}; corrupted: {}", fmt_metrics(&clean.mean), fmt_metrics(&noisy.mean)))
}

// ------------------------------------------------------------- determinism

const PIPELINE_CONFIG: &str = r#"
seed = 5

[paths]
dataset = "dataset"
samples = "masks"
model = "train/model.ckpt"

[samples]
source = "detections"

[synth]
days = 1

[synth.herd]
identities = 6

[synth.scene]
frames = 8

[synth.corruption]
jitter_sigma = 2.0
drop_rate = 0.1

[train]
epochs = 6

[protocol]
fold_mode = "within_day_k5"
kmeans_restarts = 2
val_every = 3

[report]
inputs = ["loceval", "crossval"]
"#;

fn run_pipeline(root: &Path) -> Result<(), String> {
    std::fs::write(root.join("run.toml"), PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let steps = [
        ("synth", "dataset"),
        ("refine", "refined"),
        ("build-masks", "masks"),
        ("loceval", "loceval"),
        ("train", "train"),
        ("reideval", "reideval"),
        ("crossval", "crossval"),
        ("report", "report"),
    ];
    for (cmd, out) in steps {
        let status = Command::new(env!("CARGO_BIN_EXE_dazzle"))
            .current_dir(root)
            .args([cmd, "--config", "run.toml", "--out", out])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{cmd} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
        }
    }
    Ok(())
}

fn csv_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let files = csv_files(a.path());
    let differing: Vec<String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    check(
        files.len() >= 10 && differing.is_empty() && csv_files(b.path()) == files,
        format!("8 commands run twice, {} CSV files compared, {} differ {:?}", files.len(), differing.len(), differing),
    )
}

// ------------------------------------------------------------- refinement

fn c10_refinement() -> Outcome {
    let cfg = RefineConfig::default();
    let boxes = [(25.0, 10.0), (30.0, 25.0), (249.0, 1.0), (751.0, 1.0)];
    let dets: Vec<Detection> = boxes.iter().map(|&(w, h)| Detection::new("f", Aabb::new(0.0, 0.0, w, h).unwrap(), 0.5)).collect();
    let kept: Vec<(f64, f64)> = area_ratio_filter(&dets, 100, 100, &cfg).iter().map(|d| (d.bbox.w, d.bbox.h)).collect();
    let boundaries_ok = kept == vec![(25.0, 10.0), (30.0, 25.0)];

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(0..40);
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let score = if rng.gen_bool(0.2) { 0.5 } else { rng.gen_range(0.0..1.0) };
                let bbox = Aabb::new(rng.gen_range(0.0..80.0), rng.gen_range(0.0..80.0), rng.gen_range(2.0..30.0), rng.gen_range(2.0..30.0)).unwrap();
                Detection::new("f", bbox, score)
            })
            .collect();
        let kept = nms(&dets, cfg.nms_iou_threshold);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                if aabb_iou(&a.bbox, &b.bbox) > cfg.nms_iou_threshold {
                    violations += 1;
                }
            }
        }
        // every dropped box overlaps a survivor that ranks at least as high
        for d in &dets {
            if !kept.contains(d) && !kept.iter().any(|k| k.score >= d.score && aabb_iou(&k.bbox, &d.bbox) > cfg.nms_iou_threshold) {
                violations += 1;
            }
        }
    }
    check(
        boundaries_ok && violations == 0,
        format!("area ratios 0.025 and 0.075 kept, 0.0249 and 0.0751 dropped: {boundaries_ok}; NMS violations over 1000 sets: {violations}"),
    )
}

// -------------------------------------------------------------------- main

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 10] = [
        ("c1", "geometry oracles", c1_geometry),
        ("c2", "assignment oracle", c2_assignment),
        ("c3", "clustering metric oracle", c3_clustering),
        ("c4", "contrastive loss gradient", c4_gradient),
        ("c5", "localisation metric definitions", c5_metric_definitions),
        ("c6", "jitter monotonicity", c6_monotonicity),
        ("c7", "day-wise re-identification", c7_day_wise),
        ("c8", "within-day clustering", c8_within_day),
        ("c9", "determinism", c9_determinism),
        ("c10", "refinement contracts", c10_refinement),
    ];
    let mut failed = 0;
    for (tag, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| x == tag) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {tag:>3} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {tag:>3} {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
