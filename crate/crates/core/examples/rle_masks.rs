//! Run-length mask encoding: build, inspect, combine and round-trip.

use dazzle_reid::geometry::Mask;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ring: Vec<bool> = (0..8 * 6)
        .map(|i| {
            let (x, y) = (i % 8, i / 8);
            (1..7).contains(&x) && (1..5).contains(&y) && !((3..5).contains(&x) && y == 2)
        })
        .collect();
    let mask = Mask::encode(8, 6, &ring)?;
    println!("runs (background first): {:?}", mask.runs());
    println!("area {} px, bounding box {:?}", mask.area(), mask.to_aabb()?);
    for y in 0..6 {
        let row: String = (0..8).map(|x| if mask.contains(x, y) { '#' } else { '.' }).collect();
        println!("  {row}");
    }
    let restored = Mask::from_runs(8, 6, mask.runs())?;
    assert_eq!(restored.decode(), ring);

    let shifted = mask.translate(1, 0);
    println!("overlap with itself shifted right: {} px", mask.intersection_area(&shifted)?);
    println!("union area: {} px", mask.union(&shifted)?.area());
    Ok(())
}
