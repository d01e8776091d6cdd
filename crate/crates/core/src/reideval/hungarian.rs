//! Rectangular linear assignment (Hungarian / shortest augmenting path with
//! potentials), with a lexicographic tie-break among optimal assignments.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("cost matrix rows have unequal lengths")]
    Ragged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row; `None` only when rows outnumber columns.
    pub row_to_col: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }
}

/// Above this size the lexicographic refinement (O(n^5)) is skipped and the
/// solver's own optimum is returned; it is still deterministic.
const LEX_REFINE_LIMIT: usize = 64;

/// Minimum-cost assignment of `min(n, m)` pairs. Among optimal assignments the
/// lexicographically smallest row-to-column sequence is returned.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<Assignment, AssignmentError> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m) {
        return Err(AssignmentError::Ragged);
    }
    for (i, row) in cost.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(AssignmentError::NonFinite { row: i, col: j });
        }
    }
    if n == 0 || m == 0 {
        return Ok(Assignment { row_to_col: vec![None; n], total_cost: 0.0 });
    }
    let row_to_col = if n.min(m) <= LEX_REFINE_LIMIT { lexicographic(cost, n, m) } else { solve(cost, n, m).0 };
    let total_cost = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| cost[r][c]))
        .sum();
    Ok(Assignment { row_to_col, total_cost })
}

fn tolerance(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

fn lexicographic(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<Option<usize>> {
    let (base, best) = solve(cost, n, m);
    let scale = cost.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())) * n.min(m) as f64;
    let tol = tolerance(scale);
    let mut fixed: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut fixed_cost = 0.0;
    let mut used = vec![false; m];
    let mut pairs_left = n.min(m);
    for r in 0..n {
        let rows_left = n - r;
        let mut chosen: Option<Option<usize>> = None;
        // A row may stay unassigned only when rows outnumber remaining pairs.
        let candidates = (0..m).filter(|&c| !used[c]).map(Some).chain((rows_left > pairs_left).then_some(None));
        for cand in candidates {
            if cand.is_some() && pairs_left == 0 {
                continue;
            }
            if cand == base[r] && fixed.iter().zip(&base).all(|(a, b)| a == b) {
                chosen = Some(cand);
                break;
            }
            let (add, left) = match cand {
                Some(c) => (cost[r][c], pairs_left - 1),
                None => (0.0, pairs_left),
            };
            let mut blocked = used.clone();
            if let Some(c) = cand {
                blocked[c] = true;
            }
            let rest = sub_optimum(cost, r + 1, &blocked, left);
            if (fixed_cost + add + rest - best).abs() <= tol {
                chosen = Some(cand);
                break;
            }
        }
        let cand = chosen.unwrap_or(base[r]);
        if let Some(c) = cand {
            used[c] = true;
            fixed_cost += cost[r][c];
            pairs_left -= 1;
        }
        fixed.push(cand);
    }
    fixed
}

/// Optimal cost of assigning `pairs` pairs among rows `from..` and unblocked
/// columns. `pairs` always equals min(rows left, free columns) here.
fn sub_optimum(cost: &[Vec<f64>], from: usize, blocked: &[bool], pairs: usize) -> f64 {
    if pairs == 0 {
        return 0.0;
    }
    let cols: Vec<usize> = (0..blocked.len()).filter(|&c| !blocked[c]).collect();
    let sub: Vec<Vec<f64>> = cost[from..].iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
    let (n, m) = (sub.len(), cols.len());
    let (a, _) = solve(&sub, n, m);
    a.iter().enumerate().filter_map(|(r, c)| c.map(|c| sub[r][c])).sum()
}

/// Returns (row_to_col, optimal cost).
fn solve(cost: &[Vec<f64>], n: usize, m: usize) -> (Vec<Option<usize>>, f64) {
    if n <= m {
        let a = solve_wide(|i, j| cost[i][j], n, m);
        let total = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        (a.into_iter().map(Some).collect(), total)
    } else {
        let cols = solve_wide(|i, j| cost[j][i], m, n);
        let mut rows = vec![None; n];
        let mut total = 0.0;
        for (c, &r) in cols.iter().enumerate() {
            rows[r] = Some(c);
            total += cost[r][c];
        }
        (rows, total)
    }
}

/// Shortest augmenting path with potentials for an `n x m` matrix, `n <= m`.
/// Returns the column of each row.
fn solve_wide(a: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<usize> {
    // 1-based internally; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
