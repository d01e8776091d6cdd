//! Two-component PCA projection used for embedding scatter plots.

use nalgebra::{DMatrix, SymmetricEigen};

use super::ReidError;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// Variance captured by each of the two components.
    pub variances: [f64; 2],
}

/// Projects onto the top two principal components. Each component's sign is
/// fixed so that its largest-magnitude loading is positive.
pub fn pca_project_2d(data: &[Vec<f64>]) -> Result<Projection, ReidError> {
    let n = data.len();
    if n < 2 {
        return Err(ReidError::TooFewItems(n));
    }
    let dim = data[0].len();
    if data.iter().any(|r| r.len() != dim) {
        return Err(ReidError::LengthMismatch(dim, data.iter().map(Vec::len).find(|&l| l != dim).unwrap()));
    }
    let mean: Vec<f64> = (0..dim).map(|d| data.iter().map(|r| r[d]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, dim, |i, j| data[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(2);
    let mut variances = [0.0; 2];
    for (slot, &c) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1.abs() { (i, *x) } else { acc })
            .1;
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        variances[slot] = eig.eigenvalues[c].max(0.0);
        components.push(v);
    }
    let points = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let mut p = [0.0; 2];
            for (slot, comp) in components.iter().enumerate() {
                p[slot] = row.iter().zip(comp).map(|(a, b)| a * b).sum();
            }
            p
        })
        .collect();
    Ok(Projection { points, variances })
}
