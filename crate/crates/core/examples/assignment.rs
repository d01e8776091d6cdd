//! Minimum-cost assignment on a rectangular cost matrix.

use dazzle_reid::reideval::hungarian_assign;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three workers, four jobs
    let cost = vec![vec![4.0, 1.0, 3.0, 9.0], vec![2.0, 0.0, 5.0, 8.0], vec![3.0, 2.0, 2.0, 7.0]];
    let a = hungarian_assign(&cost)?;
    for (row, col) in a.pairs() {
        println!("row {row} -> column {col} (cost {})", cost[row][col]);
    }
    println!("total {}", a.total_cost);

    // maximising overlap: negate an IoU table
    let iou = [vec![0.9, 0.2], vec![0.85, 0.8]];
    let neg: Vec<Vec<f64>> = iou.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let best = hungarian_assign(&neg)?;
    println!("best IoU pairing {:?}, total IoU {:.2}", best.row_to_col, -best.total_cost);
    Ok(())
}
