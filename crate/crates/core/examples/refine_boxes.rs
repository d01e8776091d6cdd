//! Frame-relative size filter followed by greedy non-maximum suppression.

use dazzle_reid::geometry::Aabb;
use dazzle_reid::refine::{area_ratio_filter, nms, refine, Detection, RefineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = [
        ([10.0, 10.0, 25.0, 20.0], 0.92),
        ([12.0, 11.0, 25.0, 20.0], 0.60), // duplicate of the first
        ([60.0, 10.0, 30.0, 20.0], 0.81),
        ([5.0, 70.0, 4.0, 4.0], 0.99),    // too small
        ([0.0, 0.0, 95.0, 95.0], 0.75),   // too large
        ([50.0, 55.0, 28.0, 22.0], 0.55),
    ];
    let dets = raw
        .iter()
        .map(|(b, s)| Ok(Detection::new("frame", Aabb::new(b[0], b[1], b[2], b[3])?, *s)))
        .collect::<Result<Vec<_>, dazzle_reid::geometry::GeometryError>>()?;

    let cfg = RefineConfig::default();
    let sized = area_ratio_filter(&dets, 100, 100, &cfg);
    let kept = nms(&sized, cfg.nms_iou_threshold);
    println!("{} raw, {} after size filter, {} after NMS", dets.len(), sized.len(), kept.len());
    for d in refine(&dets, 100, 100, &cfg) {
        println!("  kept {:?} score {:.2}", <[f64; 4]>::from(d.bbox), d.score);
    }
    Ok(())
}
