//! Minimum-cost perfect matching on a square cost matrix.
//!
//! Shortest augmenting paths with row/column potentials (the Jonker–Volgenant
//! formulation of the Hungarian method), O(n^3).

use nalgebra::DMatrix;

/// Returns `assignment[row] = col` minimizing the summed cost, and that cost.
///
/// Panics if `cost` is not square.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return (Vec::new(), 0.0);
    }

    // 1-based internally; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut next_col = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1, col - 1)] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    next_col = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = next_col;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        // Flip the augmenting path.
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[row_of_col[col] - 1] = col - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::test_support::permutations;

    #[test]
    fn textbook_instance() {
        let cost = DMatrix::from_row_slice(3, 3, &[8.0, 4.0, 7.0, 5.0, 2.0, 3.0, 9.0, 4.0, 8.0]);
        let (assign, total) = min_cost_assignment(&cost);
        assert_eq!(total, 15.0);
        let mut cols = assign.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2]);
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(min_cost_assignment(&DMatrix::zeros(0, 0)), (vec![], 0.0));
        assert_eq!(min_cost_assignment(&DMatrix::from_element(1, 1, 2.5)), (vec![0], 2.5));
    }

    #[test]
    fn matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for n in 1..=6 {
            let all = permutations(n);
            for _ in 0..30 {
                let cost = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..10.0));
                let brute = all
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(r, &c)| cost[(r, c)]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let (_, total) = min_cost_assignment(&cost);
                assert!((total - brute).abs() < 1e-9, "n={n}: {total} vs {brute}");
            }
        }
    }
}
