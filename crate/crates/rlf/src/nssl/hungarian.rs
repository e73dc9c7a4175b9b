//! Optimal cluster→class alignment via the assignment problem.
//!
//! Unsupervised clusters carry arbitrary indices; to score them against
//! ground truth we find the permutation maximizing the total count of
//! agreeing samples in the cluster×class contingency table. The optimum
//! is found with the Hungarian algorithm (Kuhn–Munkres, the O(n³)
//! potential/augmenting-path formulation), and ties between equally good
//! permutations resolve to the lexicographically smallest one so the
//! result is a pure function of the table.

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix; returns the
/// optimal total cost. Costs need only be finite — counts negated for
/// maximization are fine. Integer-valued costs stay exact in f64, so the
/// returned total supports exact equality comparison.
fn min_assignment_value(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    // Potentials u (rows) / v (columns, plus a virtual start column at
    // index n), and match_col[j] = row currently assigned to column j.
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    let mut match_col: Vec<Option<usize>> = vec![None; n + 1];
    for i in 0..n {
        match_col[n] = Some(i);
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n];
        let mut way = vec![n; n];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0].expect("columns on the alternating path are matched");
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0][j] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if let Some(r) = match_col[j] {
                        u[r] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0].is_none() {
                break;
            }
        }
        while j0 != n {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        }
    }
    let mut total = 0.0;
    for j in 0..n {
        let r = match_col[j].expect("perfect matching covers every column");
        total += cost[r][j];
    }
    total
}

/// Maximum achievable total count assigning each listed row to a distinct
/// listed column.
fn max_match_value(table: &[Vec<usize>], rows: &[usize], cols: &[usize]) -> f64 {
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| -(table[r][c] as f64)).collect())
        .collect();
    -min_assignment_value(&cost)
}

/// Returns the cluster→class permutation maximizing the total matched
/// count of a square contingency table (`table[cluster][class]`).
///
/// When several permutations achieve the optimum, the lexicographically
/// smallest one is returned, fixing one column per row in ascending row
/// order and keeping the first column that still permits the optimal
/// total (exact, since integer counts are exact in f64).
pub fn align_labels_hungarian(table: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = table.len();
    for row in table {
        if row.len() != n {
            return Err(Error::Dimension {
                left: n,
                right: row.len(),
            });
        }
    }

    let all: Vec<usize> = (0..n).collect();
    let best = max_match_value(table, &all, &all);

    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut fixed_sum = 0.0;
    for row in 0..n {
        let free_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for col in 0..n {
            if used[col] {
                continue;
            }
            let free_cols: Vec<usize> = (0..n).filter(|&c| !used[c] && c != col).collect();
            let rest = max_match_value(table, &free_rows, &free_cols);
            if fixed_sum + table[row][col] as f64 + rest == best {
                chosen = Some(col);
                break;
            }
        }
        let col = chosen.expect("every row extends to an optimal assignment");
        used[col] = true;
        fixed_sum += table[row][col] as f64;
        perm.push(col);
    }
    Ok(perm)
}
