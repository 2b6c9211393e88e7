//! Exact solution of the pairing problem without prices.

use crate::matching::Matching;
use crate::policy::PayoffMatrix;

/// Maximum-payoff one-to-one pairing. Unacceptable pairs are never matched.
///
/// Unacceptable entries are scored 0 (as good as leaving both unmatched) and
/// the matrix is padded to a square; the padded problem is solved with the
/// Hungarian method and zero-value or unacceptable pairs are dropped again.
pub fn optimal_assignment(payoffs: &PayoffMatrix) -> (Matching, f64) {
    let (rows, cols) = (payoffs.rows(), payoffs.cols());
    let mut matching = Matching::empty(rows, cols);
    let size = rows.max(cols);
    if rows == 0 || cols == 0 {
        return (matching, 0.0);
    }
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|m| {
            (0..size)
                .map(|n| {
                    if m < rows && n < cols {
                        -payoffs.get(m, n).max(0.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let mut total = 0.0;
    for (m, &n) in assignment.iter().enumerate().take(rows) {
        if n < cols && payoffs.is_acceptable(m, n) {
            matching.pair(m, n, 0.0);
            total += payoffs.get(m, n);
        }
    }
    (matching, total)
}

/// Minimum-cost perfect assignment on a square matrix (row → column),
/// O(n³) shortest augmenting paths with potentials.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));

    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
