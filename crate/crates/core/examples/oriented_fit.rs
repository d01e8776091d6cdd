//! Tightest rotated rectangle around a mask, compared with its upright box.

use dazzle_reid::geometry::{min_area_obb, Mask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a diagonal bar, 6 px thick
    let (w, h) = (60u32, 60u32);
    let bits: Vec<bool> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            (x - y).abs() <= 3 && (5..55).contains(&x)
        })
        .collect();
    let mask = Mask::encode(w, h, &bits)?;
    let upright = mask.to_aabb()?;
    let fit = min_area_obb(&mask)?;
    println!("pixels            {}", mask.area());
    println!("upright box area  {:.1}", upright.area());
    println!(
        "oriented box      {:.2} x {:.2} at {:.1} deg, area {:.1}",
        fit.w,
        fit.h,
        fit.theta.to_degrees(),
        fit.area()
    );
    Ok(())
}
