//! Minimum-cost matching of tasks to robots.

use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres_min;

/// Largest row count solved exactly; larger instances are matched greedily.
pub const EXACT_LIMIT: usize = 20;

/// Cost marking a pairing that must not be chosen.
pub const FORBIDDEN: i64 = i64::MAX / 1024;

/// Assigns each row a distinct column, returning the total cost and the
/// column of each row. Requires `rows <= columns`. Exact for up to
/// [`EXACT_LIMIT`] rows.
pub fn min_cost_assignment(costs: &[Vec<i64>]) -> (i64, Vec<usize>) {
    if costs.is_empty() {
        return (0, Vec::new());
    }
    let cols = costs[0].len();
    assert!(costs.iter().all(|r| r.len() == cols), "ragged cost matrix");
    assert!(costs.len() <= cols, "more rows than columns");
    if costs.len() > EXACT_LIMIT {
        return greedy_assignment(costs);
    }
    let m = Matrix::from_fn(costs.len(), cols, |(i, j)| costs[i][j]);
    kuhn_munkres_min(&m)
}

/// Repeatedly takes the cheapest remaining (row, column) pair.
pub fn greedy_assignment(costs: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let mut pairs: Vec<(i64, usize, usize)> = costs
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, c)| (*c, i, j)))
        .collect();
    pairs.sort_unstable();
    let mut out = vec![usize::MAX; costs.len()];
    let mut used = vec![false; costs.first().map_or(0, Vec::len)];
    let mut total = 0;
    for (c, i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
            total += c;
        }
    }
    (total, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn brute(costs: &[Vec<i64>]) -> i64 {
        fn go(costs: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
            if row == costs.len() {
                return 0;
            }
            let mut best = i64::MAX;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(costs[row][j] + go(costs, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(costs, 0, &mut vec![false; costs[0].len()])
    }

    #[test]
    fn matches_permutation_search() {
        let mut rng = SplitMix64::seed_from_u64(11);
        for _ in 0..60 {
            let rows = 1 + (rng.next_u64() % 8) as usize;
            let cols = rows + (rng.next_u64() % 3) as usize;
            let costs: Vec<Vec<i64>> =
                (0..rows).map(|_| (0..cols).map(|_| (rng.next_u64() % 500) as i64).collect()).collect();
            let (total, cols_of) = min_cost_assignment(&costs);
            assert_eq!(total, brute(&costs));
            let sum: i64 = cols_of.iter().enumerate().map(|(i, j)| costs[i][*j]).sum();
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn greedy_is_a_valid_matching() {
        let costs: Vec<Vec<i64>> = (0..25).map(|i| (0..30).map(|j| ((i * 7 + j * 13) % 41) as i64).collect()).collect();
        let (total, cols_of) = min_cost_assignment(&costs);
        let mut seen = cols_of.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 25);
        assert_eq!(total, cols_of.iter().enumerate().map(|(i, j)| costs[i][*j]).sum::<i64>());
    }
}
