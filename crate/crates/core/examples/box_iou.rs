//! Overlap of axis-aligned boxes, rotated boxes and pixel masks.

use dazzle_reid::geometry::{aabb_iou, mask_iou, obb_iou, Aabb, Mask, Obb};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Aabb::new(10.0, 10.0, 40.0, 20.0)?;
    let b = Aabb::new(30.0, 15.0, 40.0, 20.0)?;
    println!("aabb iou            {:.4}", aabb_iou(&a, &b));

    // the same two boxes, then the second one turned by 30 degrees
    let oa = a.to_obb();
    let ob = b.to_obb();
    let turned = Obb::new(ob.cx, ob.cy, ob.w, ob.h, 30f64.to_radians())?;
    println!("obb iou (aligned)   {:.4}", obb_iou(&oa, &ob));
    println!("obb iou (rotated)   {:.4}", obb_iou(&oa, &turned));

    let ma = Mask::from_rect(80, 50, 10, 10, 50, 30);
    let mb = Mask::from_rect(80, 50, 30, 15, 70, 35);
    println!("mask iou            {:.4}", mask_iou(&ma, &mb)?);
    Ok(())
}
