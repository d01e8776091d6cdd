//! Partition agreement: ARI, AMI, NMI and Hungarian accuracy, all from the
//! contingency table. NMI and AMI normalise by the arithmetic mean of the two
//! entropies.

use std::collections::HashMap;
use std::hash::Hash;

use super::hungarian::hungarian_assign;
use super::ReidError;

/// Dense relabelling of an arbitrary labelling, first appearance first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    pub fn from_labels<T: Hash + Eq + Clone>(labels: &[T]) -> Self {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let dense = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self { labels: dense, n_clusters: ids.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }
}

/// `table[i][j]` counts items in cluster `i` of `a` and cluster `j` of `b`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<Vec<Vec<u64>>, ReidError> {
    if a.len() != b.len() {
        return Err(ReidError::LengthMismatch(a.len(), b.len()));
    }
    let mut t = vec![vec![0u64; b.n_clusters]; a.n_clusters];
    for (&i, &j) in a.labels.iter().zip(&b.labels) {
        t[i][j] += 1;
    }
    Ok(t)
}

fn check_len(a: &Partition, b: &Partition) -> Result<(), ReidError> {
    if a.len() != b.len() {
        return Err(ReidError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(ReidError::TooFewItems(a.len()));
    }
    Ok(())
}

fn comb2(x: u64) -> u128 {
    x as u128 * x.saturating_sub(1) as u128 / 2
}

/// Adjusted Rand index under the permutation model. Exact integer arithmetic
/// up to the final division.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64, ReidError> {
    check_len(a, b)?;
    let t = contingency(a, b)?;
    let index: u128 = t.iter().flatten().map(|&c| comb2(c)).sum();
    let sa: u128 = t.iter().map(|row| comb2(row.iter().sum())).sum();
    let sb: u128 = (0..b.n_clusters).map(|j| comb2(t.iter().map(|r| r[j]).sum())).sum();
    let total = comb2(a.len() as u64);
    // (index - sa*sb/total) / ((sa+sb)/2 - sa*sb/total), scaled by 2*total
    let num = 2 * index as i128 * total as i128 - 2 * (sa * sb) as i128;
    let den = (sa + sb) as i128 * total as i128 - 2 * (sa * sb) as i128;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| {
        let p = c as f64 / n;
        -p * p.ln()
    }).sum()
}

struct Tables {
    t: Vec<Vec<u64>>,
    row: Vec<u64>,
    col: Vec<u64>,
    n: u64,
}

fn tables(a: &Partition, b: &Partition) -> Result<Tables, ReidError> {
    let t = contingency(a, b)?;
    let row = t.iter().map(|r| r.iter().sum()).collect();
    let col = (0..b.n_clusters).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    Ok(Tables { t, row, col, n: a.len() as u64 })
}

fn mutual_info(tb: &Tables) -> f64 {
    let n = tb.n as f64;
    let mut mi = 0.0;
    for (i, row) in tb.t.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (tb.row[i] as f64 * tb.col[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn nmi(a: &Partition, b: &Partition) -> Result<f64, ReidError> {
    check_len(a, b)?;
    if a.n_clusters == 1 && b.n_clusters == 1 {
        return Ok(1.0);
    }
    let tb = tables(a, b)?;
    let n = tb.n as f64;
    let ha = entropy(tb.row.iter().copied(), n);
    let hb = entropy(tb.col.iter().copied(), n);
    let mi = mutual_info(&tb);
    let norm = ((ha + hb) / 2.0).max(f64::EPSILON);
    Ok(mi / norm)
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Expected mutual information under the hypergeometric model.
fn expected_mutual_info(tb: &Tables) -> f64 {
    let n = tb.n;
    let nf = n as f64;
    let lf = ln_factorials(n);
    let mut emi = 0.0;
    for &ai in &tb.row {
        for &bj in &tb.col {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let mut nij = lo;
            while nij <= hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (ai as f64 * bj as f64)).ln();
                let lw = lf[ai as usize] + lf[bj as usize] + lf[(n - ai) as usize] + lf[(n - bj) as usize]
                    - lf[n as usize]
                    - lf[nij as usize]
                    - lf[(ai - nij) as usize]
                    - lf[(bj - nij) as usize]
                    - lf[(n + nij - ai - bj) as usize];
                emi += term * lw.exp();
                nij += 1;
            }
        }
    }
    emi
}

pub fn ami(a: &Partition, b: &Partition) -> Result<f64, ReidError> {
    check_len(a, b)?;
    if a.n_clusters == b.n_clusters && (a.n_clusters == 1 || a.n_clusters == a.len()) {
        return Ok(1.0);
    }
    let tb = tables(a, b)?;
    let n = tb.n as f64;
    let ha = entropy(tb.row.iter().copied(), n);
    let hb = entropy(tb.col.iter().copied(), n);
    let mi = mutual_info(&tb);
    let emi = expected_mutual_info(&tb);
    let mut den = (ha + hb) / 2.0 - emi;
    den = if den < 0.0 { den.min(-f64::EPSILON) } else { den.max(f64::EPSILON) };
    Ok((mi - emi) / den)
}

/// Accuracy after the best one-to-one mapping of clusters to labels.
pub fn hungarian_accuracy(truth: &Partition, clusters: &Partition) -> Result<f64, ReidError> {
    if truth.len() != clusters.len() {
        return Err(ReidError::LengthMismatch(truth.len(), clusters.len()));
    }
    if truth.is_empty() {
        return Err(ReidError::TooFewItems(0));
    }
    let t = contingency(clusters, truth)?;
    let cost: Vec<Vec<f64>> = t.iter().map(|r| r.iter().map(|&c| -(c as f64)).collect()).collect();
    let assignment = hungarian_assign(&cost)?;
    let matched: u64 = assignment.pairs().map(|(i, j)| t[i][j]).sum();
    Ok(matched as f64 / truth.len() as f64)
}
