//! Exact discrete optimal transport by the transportation simplex method.
//!
//! Northwest-corner start, potentials from the basis tree, Dantzig's most-negative
//! reduced cost for the entering cell. Long runs of degenerate pivots switch to Bland's
//! first-negative rule to avoid stalling.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Optimal flows `(source, sink, mass)` on the basic cells and the total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

const MAX_DEGENERATE_RUN: usize = 50;

/// Minimizes `sum x_ij cost_ij` subject to row sums `supply` and column sums `demand`.
/// `demand` is rescaled to the supply's total mass; callers check the mismatch first.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &DMatrix<f64>) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.nrows() != m || cost.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "transport problem shape mismatch: {m} sources, {n} sinks, cost {}x{}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidInput("transport masses must be non-negative".into()));
    }
    let scale = supply.iter().sum::<f64>() / demand.iter().sum::<f64>();
    let mut rest_supply = supply.to_vec();
    let mut rest_demand: Vec<f64> = demand.iter().map(|d| d * scale).collect();

    // Northwest corner: walks a staircase from (0,0) to (m-1,n-1), m+n-1 basic cells.
    let mut flow = DMatrix::<f64>::zeros(m, n);
    let mut basic = DMatrix::<bool>::from_element(m, n, false);
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let q = rest_supply[i].min(rest_demand[j]);
        flow[(i, j)] = q;
        basic[(i, j)] = true;
        basis.push((i, j));
        rest_supply[i] -= q;
        rest_demand[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (rest_supply[i] == 0.0 && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let cost_scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
    let tolerance = 1e-12 * cost_scale;
    let max_pivots = 1000 * (m + n) * (m + n);
    let mut degenerate_run = 0;

    for _ in 0..max_pivots {
        let (u, v) = potentials(&basis, cost, m, n);

        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if basic[(i, j)] {
                    continue;
                }
                let reduced = cost[(i, j)] - u[i] - v[j];
                if reduced < -tolerance {
                    if degenerate_run >= MAX_DEGENERATE_RUN {
                        entering = Some((i, j, reduced));
                        break 'scan;
                    }
                    if entering.is_none_or(|(_, _, best)| reduced < best) {
                        entering = Some((i, j, reduced));
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            let flows: Vec<_> = basis.iter().map(|&(i, j)| (i, j, flow[(i, j)])).collect();
            let total = flows.iter().map(|&(i, j, x)| x * cost[(i, j)]).sum();
            return Ok(TransportPlan { flows, cost: total });
        };

        // Cycle: entering cell (+), then the tree path from its column back to its row,
        // alternating (-, +, ..., -).
        let path = tree_path(&basis, m, n, ej, ei);
        let (leave_pos, theta) = path
            .iter()
            .enumerate()
            .filter(|(k, _)| k % 2 == 0)
            .map(|(k, &b)| (k, flow[(basis[b].0, basis[b].1)]))
            .fold((usize::MAX, f64::INFINITY), |acc, (k, x)| if x < acc.1 { (k, x) } else { acc });

        for (k, &b) in path.iter().enumerate() {
            let cell = basis[b];
            if k % 2 == 0 {
                flow[cell] -= theta;
            } else {
                flow[cell] += theta;
            }
        }
        flow[(ei, ej)] = theta;
        let leaving = path[leave_pos];
        let (li, lj) = basis[leaving];
        flow[(li, lj)] = 0.0;
        basic[(li, lj)] = false;
        basic[(ei, ej)] = true;
        basis[leaving] = (ei, ej);

        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }
    Err(Error::TransportNoConvergence(max_pivots))
}

/// Node ids: rows are `0..m`, columns are `m..m+n`.
fn adjacency(basis: &[(usize, usize)], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + n];
    for (b, &(i, j)) in basis.iter().enumerate() {
        adj[i].push((m + j, b));
        adj[m + j].push((i, b));
    }
    adj
}

fn potentials(basis: &[(usize, usize)], cost: &DMatrix<f64>, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(basis, m, n);
    let mut pot = vec![f64::NAN; m + n];
    let mut queue = VecDeque::from([0]);
    pot[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &(next, b) in &adj[node] {
            if pot[next].is_nan() {
                let (i, j) = basis[b];
                pot[next] = cost[(i, j)] - pot[node];
                queue.push_back(next);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

/// Basis indices along the unique tree path from column `col` to row `row`.
fn tree_path(basis: &[(usize, usize)], m: usize, n: usize, col: usize, row: usize) -> Vec<usize> {
    let adj = adjacency(basis, m, n);
    let start = m + col;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &(next, b) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, b));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while let Some((prev, b)) = parent[node] {
        path.push(b);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::assignment::min_cost_assignment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_marginals(plan: &TransportPlan, supply: &[f64], demand: &[f64]) {
        let mut rows = vec![0.0; supply.len()];
        let mut cols = vec![0.0; demand.len()];
        for &(i, j, x) in &plan.flows {
            assert!(x >= -1e-12, "negative flow {x}");
            rows[i] += x;
            cols[j] += x;
        }
        for (a, b) in rows.iter().zip(supply).chain(cols.iter().zip(demand)) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn classic_instance() {
        // Balanced 3x4 textbook problem with optimum 743.
        let supply = [7.0, 9.0, 18.0];
        let demand = [5.0, 8.0, 7.0, 14.0];
        let cost = DMatrix::from_row_slice(3, 4, &[
            19.0, 30.0, 50.0, 10.0, //
            70.0, 30.0, 40.0, 60.0, //
            40.0, 8.0, 70.0, 20.0,
        ]);
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        check_marginals(&plan, &supply, &demand);
        assert!((plan.cost - 743.0).abs() < 1e-9, "cost {}", plan.cost);
    }

    #[test]
    fn agrees_with_assignment_on_uniform_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=8 {
            for _ in 0..20 {
                let cost = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..5.0));
                let w = vec![1.0 / n as f64; n];
                let plan = solve_transport(&w, &w, &cost).unwrap();
                check_marginals(&plan, &w, &w);
                let (_, matched) = min_cost_assignment(&cost);
                assert!((plan.cost - matched / n as f64).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn single_source_or_sink() {
        let cost = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let plan = solve_transport(&[1.0], &[0.2, 0.3, 0.5], &cost).unwrap();
        assert!((plan.cost - (0.2 + 0.6 + 1.5)).abs() < 1e-12);
        let plan = solve_transport(&[0.2, 0.3, 0.5], &[1.0], &cost.transpose()).unwrap();
        assert!((plan.cost - (0.2 + 0.6 + 1.5)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_masses() {
        // Equal partial sums make the northwest corner degenerate.
        let supply = [0.25, 0.25, 0.25, 0.25];
        let demand = [0.5, 0.5];
        let cost = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        check_marginals(&plan, &supply, &demand);
        assert!(plan.cost.abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(solve_transport(&[], &[1.0], &DMatrix::zeros(0, 1)).is_err());
        assert!(solve_transport(&[1.0], &[1.0], &DMatrix::zeros(2, 1)).is_err());
        assert!(solve_transport(&[-1.0, 2.0], &[1.0], &DMatrix::zeros(2, 1)).is_err());
    }
}
