//! Empirical measures of displacement windows and distances between them.

pub mod assignment;
pub mod transport;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::rng_stream;
use crate::Point;

use self::assignment::min_cost_assignment;
use self::transport::solve_transport;

/// Finitely many weighted atoms in `R^d`; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "measure needs matching non-empty atoms and weights, got {} and {}",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidInput("atoms have mixed dimensions".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("measure weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("measure weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Equal weights on every atom.
    pub fn uniform(atoms: Vec<Point>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidInput("measure needs at least one atom".into()));
        };
        let dim = first.len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidInput("atoms have mixed dimensions".into()));
        }
        let weights = vec![1.0 / atoms.len() as f64; atoms.len()];
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| (w - w0).abs() <= 1e-12)
    }

    pub fn mean(&self) -> Point {
        self.atoms
            .iter()
            .zip(&self.weights)
            .fold(Point::zeros(self.dim()), |acc, (a, w)| acc + a * *w)
    }

    /// Weighted population covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let d = self.dim();
        self.atoms.iter().zip(&self.weights).fold(DMatrix::zeros(d, d), |acc, (a, w)| {
            let c = a - &mean;
            acc + (&c * c.transpose()) * *w
        })
    }

    /// Writes `x,y,w` rows (one coordinate column per dimension).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let axes = crate::io::axis_names(self.dim())?;
        writeln!(out, "{},w", axes.join(","))?;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            let coords: Vec<String> = a.iter().map(|&x| crate::io::fmt_f64(x)).collect();
            writeln!(out, "{},{}", coords.join(","), crate::io::fmt_f64(*w))?;
        }
        Ok(())
    }
}

/// A sliding window of half-width `k` centered at time `t` (1-based) of a horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub k: usize,
    pub t: usize,
    pub horizon: usize,
}

impl WindowSpec {
    pub const DEFAULT_HALF_WIDTH: usize = 6;

    pub fn new(k: usize, t: usize, horizon: usize) -> Self {
        Self { k, t, horizon }
    }

    /// Inclusive range of 1-based start indices `j` of the increments `p[j+1] - p[j]`
    /// in the window: `t + k_t ..= t + K_t` with `k_t = max(-k, 1 - t)` and
    /// `K_t = min(k - 1, T - t - 1)`.
    pub fn increment_range(&self) -> Result<std::ops::RangeInclusive<usize>> {
        let (t, k, horizon) = (self.t as i64, self.k as i64, self.horizon as i64);
        if self.t < 1 || self.t > self.horizon || self.k < 1 {
            return Err(Error::EmptyWindow { t: self.t, horizon: self.horizon });
        }
        let lo = t + (-k).max(1 - t);
        let hi = t + (k - 1).min(horizon - t - 1);
        if hi < lo {
            return Err(Error::EmptyWindow { t: self.t, horizon: self.horizon });
        }
        Ok(lo as usize..=hi as usize)
    }
}

/// Uniform measure on the path increments inside `spec`'s window.
pub fn window_measure(path: &[Point], spec: WindowSpec) -> Result<EmpiricalMeasure> {
    if path.len() < 2 || path.len() != spec.horizon {
        return Err(Error::InvalidInput(format!(
            "path has {} points, window expects horizon {}",
            path.len(),
            spec.horizon
        )));
    }
    let atoms = spec.increment_range()?.map(|j| &path[j] - &path[j - 1]).collect();
    EmpiricalMeasure::uniform(atoms)
}

/// `count` i.i.d. draws from `N(mean, var I)` with equal weights.
pub fn gaussian_sample_measure(mean: &Point, var: f64, count: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if count == 0 || !(var >= 0.0) {
        return Err(Error::InvalidInput(format!("bad gaussian sample request: count={count}, var={var}")));
    }
    let mut rng = rng_stream(seed, 0);
    Ok(EmpiricalMeasure::uniform(gaussian_draws(&mut rng, mean, var.sqrt(), count))?)
}

pub(crate) fn gaussian_draws<R: Rng>(rng: &mut R, mean: &Point, sigma: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| mean + DVector::from_fn(mean.len(), |_, _| sigma * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn check_comparable(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput(format!(
            "cannot compare measures in R^{} and R^{}",
            mu.dim(),
            nu.dim()
        )));
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > 1e-9 {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

fn squared_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> DMatrix<f64> {
    DMatrix::from_fn(mu.len(), nu.len(), |i, j| (&mu.atoms[i] - &nu.atoms[j]).norm_squared())
}

/// Exact Wasserstein-2 distance. Uniform measures of equal size are matched by
/// assignment; anything else goes through the transportation simplex.
pub fn wasserstein2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_comparable(mu, nu)?;
    let cost = squared_cost(mu, nu);
    let total = if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        min_cost_assignment(&cost).1 / mu.len() as f64
    } else {
        solve_transport(&mu.weights, &nu.weights, &cost)?.cost
    };
    Ok(total.max(0.0).sqrt())
}

/// Wasserstein-2 forced through the transportation simplex, bypassing the assignment
/// fast path.
pub fn wasserstein2_transport(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_comparable(mu, nu)?;
    Ok(solve_transport(&mu.weights, &nu.weights, &squared_cost(mu, nu))?.cost.max(0.0).sqrt())
}

/// `sum_ij a_i b_j ||x_i - y_j||`.
fn mean_pair_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let mut total = 0.0;
    for (x, a) in mu.atoms.iter().zip(&mu.weights) {
        for (y, b) in nu.atoms.iter().zip(&nu.weights) {
            total += a * b * (x - y).norm();
        }
    }
    total
}

/// Squared maximum mean discrepancy under the Riesz kernel `K(x, y) = -||x - y||`:
/// `2 E||X - Y|| - E||X - X'|| - E||Y - Y'||`. May be a hair below zero from round-off.
pub fn mmd_riesz_squared(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    2.0 * mean_pair_distance(mu, nu) - mean_pair_distance(mu, mu) - mean_pair_distance(nu, nu)
}

/// Riesz-kernel MMD, clamped at zero before the square root.
pub fn mmd_riesz(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_comparable(mu, nu)?;
    Ok(mmd_riesz_squared(mu, nu).max(0.0).sqrt())
}

/// `(||E_mu - E_nu||, |sqrt det cov(mu) - sqrt det cov(nu)|)`.
pub fn mv_distances(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<(f64, f64)> {
    check_comparable(mu, nu)?;
    let d_m = (mu.mean() - nu.mean()).norm();
    let d_v = (sqrt_det(&mu.covariance()) - sqrt_det(&nu.covariance())).abs();
    Ok((d_m, d_v))
}

/// Mean-variance distances to the analytic Gaussian `N(mean, var I)`, whose covariance
/// determinant root is `var^{d/2}`.
pub fn mv_distances_to_gaussian(mu: &EmpiricalMeasure, mean: &Point, var: f64) -> Result<(f64, f64)> {
    if mean.len() != mu.dim() || !(var >= 0.0) {
        return Err(Error::InvalidInput("gaussian reference does not match the measure".into()));
    }
    let d_m = (mu.mean() - mean).norm();
    let d_v = (sqrt_det(&mu.covariance()) - var.powf(mu.dim() as f64 / 2.0)).abs();
    Ok((d_m, d_v))
}

fn sqrt_det(cov: &DMatrix<f64>) -> f64 {
    // Covariances are PSD; a tiny negative determinant is round-off.
    cov.determinant().max(0.0).sqrt()
}


#[cfg(test)]
mod tests {
    use super::test_support::permutations;
    use super::*;
    use proptest::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(xs: &[f64]) -> Point {
        Point::from_column_slice(xs)
    }

    fn dirac(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(vec![pt(xs)]).unwrap()
    }

    fn uniform(points: &[[f64; 2]]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(points.iter().map(|p| pt(p)).collect()).unwrap()
    }

    fn random_uniform(rng: &mut ChaCha8Rng, n: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform((0..n).map(|_| pt(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])).collect())
            .unwrap()
    }

    fn random_weighted(rng: &mut ChaCha8Rng, n: usize) -> EmpiricalMeasure {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = weights[..n - 1].iter().sum();
        weights[n - 1] = 1.0 - head;
        let atoms = (0..n).map(|_| pt(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])).collect();
        EmpiricalMeasure::new(atoms, weights).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(EmpiricalMeasure::uniform(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(&[0.0])], vec![0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![pt(&[0.0]), pt(&[1.0])], vec![1.0, 0.0]).is_err());
        assert!(EmpiricalMeasure::uniform(vec![pt(&[0.0]), pt(&[1.0, 2.0])]).is_err());
    }

    #[test]
    fn interior_window() {
        let path: Vec<Point> = (1..=10).map(|i| pt(&[(i * i) as f64, 0.0])).collect();
        let m = window_measure(&path, WindowSpec::new(2, 5, 10)).unwrap();
        // Increments between 1-based positions (3,4), (4,5), (5,6), (6,7).
        let expected: Vec<Point> = [(3, 4), (4, 5), (5, 6), (6, 7)]
            .iter()
            .map(|&(a, b)| pt(&[(b * b - a * a) as f64, 0.0]))
            .collect();
        assert_eq!(m.atoms(), &expected[..]);
        assert_eq!(m.weights(), &[0.25; 4]);
    }

    #[test]
    fn boundary_windows() {
        let path: Vec<Point> = (0..10).map(|i| pt(&[i as f64, 0.0])).collect();
        let first = window_measure(&path, WindowSpec::new(2, 1, 10)).unwrap();
        assert_eq!(first.len(), 2);
        assert_eq!(first.weights(), &[0.5, 0.5]);
        // k_T = -k, K_T = -1: the last two increments.
        assert_eq!(window_measure(&path, WindowSpec::new(2, 10, 10)).unwrap().len(), 2);
        assert_eq!(window_measure(&path, WindowSpec::new(2, 9, 10)).unwrap().len(), 3);
        for t in [0, 11] {
            assert!(matches!(window_measure(&path, WindowSpec::new(2, t, 10)), Err(Error::EmptyWindow { .. })));
        }
        for t in 3..=8 {
            assert_eq!(window_measure(&path, WindowSpec::new(2, t, 10)).unwrap().len(), 4);
        }
    }

    #[test]
    fn constant_path_window_is_zero() {
        let path = vec![pt(&[1.0, -2.0]); 20];
        let m = window_measure(&path, WindowSpec::new(6, 10, 20)).unwrap();
        assert_eq!(m.len(), 12);
        assert!(m.atoms().iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn gaussian_samples() {
        let mean = pt(&[0.3, 0.3]);
        let m = gaussian_sample_measure(&mean, 0.0, 5, 1).unwrap();
        assert!(m.atoms().iter().all(|a| a == &mean));
        assert_eq!(gaussian_sample_measure(&mean, 1.0, 1, 1).unwrap().len(), 1);
        assert_eq!(gaussian_sample_measure(&mean, 0.25, 7, 9).unwrap(), gaussian_sample_measure(&mean, 0.25, 7, 9).unwrap());

        let big = gaussian_sample_measure(&mean, 0.25, 100_000, 2).unwrap();
        let bound = 3.0 * 0.5 / (100_000f64).sqrt();
        assert!((big.mean() - &mean).amax() < bound);
    }

    #[test]
    fn wasserstein_examples() {
        let m = uniform(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]]);
        assert_eq!(wasserstein2(&m, &m).unwrap(), 0.0);
        assert_eq!(wasserstein2(&dirac(&[0.0, 0.0]), &dirac(&[3.0, 4.0])).unwrap(), 5.0);
        let a = uniform(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = uniform(&[[0.0, 1.0], [1.0, 1.0]]);
        // Vertical matching costs 1 per atom, crossing costs 2 per atom.
        assert!((wasserstein2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_mass_mismatch() {
        let a = dirac(&[0.0, 0.0]);
        let b = EmpiricalMeasure { atoms: vec![pt(&[1.0, 0.0])], weights: vec![1.0 + 1e-6] };
        assert!(matches!(wasserstein2(&a, &b), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn wasserstein_matches_permutation_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..200 {
            let n = 1 + trial % 6;
            let (a, b) = (random_uniform(&mut rng, n), random_uniform(&mut rng, n));
            let brute = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| (&a.atoms[i] - &b.atoms[j]).norm_squared()).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let w = wasserstein2(&a, &b).unwrap();
            assert!((w - (brute / n as f64).sqrt()).abs() < 1e-9);
            assert!((wasserstein2_transport(&a, &b).unwrap() - w).abs() < 1e-9);
        }
    }

    #[test]
    fn transport_beats_random_feasible_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let (a, b) = (random_weighted(&mut rng, m), random_weighted(&mut rng, n));
            let optimal = wasserstein2(&a, &b).unwrap().powi(2);
            let cost = squared_cost(&a, &b);
            for _ in 0..1000 {
                let plan_cost = random_feasible_plan_cost(&mut rng, a.weights(), b.weights(), &cost);
                assert!(optimal <= plan_cost + 1e-12, "{optimal} > {plan_cost}");
            }
        }
    }

    /// Greedy fill in random row/column order: always a feasible coupling.
    fn random_feasible_plan_cost(rng: &mut ChaCha8Rng, a: &[f64], b: &[f64], cost: &DMatrix<f64>) -> f64 {
        use rand::seq::SliceRandom;
        let mut rows: Vec<usize> = (0..a.len()).collect();
        let mut cols: Vec<usize> = (0..b.len()).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let mut total = 0.0;
        for &i in &rows {
            for &j in &cols {
                let q = ra[i].min(rb[j]);
                total += q * cost[(i, j)];
                ra[i] -= q;
                rb[j] -= q;
            }
        }
        total
    }

    #[test]
    fn mmd_examples() {
        let m = uniform(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]]);
        assert_eq!(mmd_riesz(&m, &m).unwrap(), 0.0);
        let d = mmd_riesz(&dirac(&[0.0, 0.0]), &dirac(&[3.0, 4.0])).unwrap();
        assert!((d - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mmd_matches_matrix_double_sum() {
        let a = uniform(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]]);
        let b = uniform(&[[0.5, 0.5], [2.0, -1.0]]);
        // Independent route: full Gram-matrix quadratic form over the joint support.
        let support: Vec<&Point> = a.atoms().iter().chain(b.atoms()).collect();
        let signed: Vec<f64> = a.weights().iter().copied().chain(b.weights().iter().map(|w| -w)).collect();
        let gram = DMatrix::from_fn(support.len(), support.len(), |i, j| -(support[i] - support[j]).norm());
        let s = DVector::from_vec(signed);
        let quad = (s.transpose() * gram * &s)[(0, 0)];
        assert!((mmd_riesz_squared(&a, &b) - quad).abs() < 1e-12);
        assert!((mmd_riesz(&a, &b).unwrap() - quad.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metric_axioms_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let n = 1 + trial % 6;
            let ms: Vec<_> = (0..3).map(|_| random_uniform(&mut rng, n)).collect();
            for dist in [wasserstein2, mmd_riesz] {
                let d = |i: usize, j: usize| dist(&ms[i], &ms[j]).unwrap();
                assert!(d(0, 1) >= 0.0);
                assert!((d(0, 1) - d(1, 0)).abs() < 1e-9);
                assert!(d(0, 0) < 1e-9);
                assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            }
        }
        let ms: Vec<_> = (0..3).map(|k| random_weighted(&mut rng, 2 + k)).collect();
        assert!(wasserstein2(&ms[0], &ms[2]).unwrap() <= wasserstein2(&ms[0], &ms[1]).unwrap() + wasserstein2(&ms[1], &ms[2]).unwrap() + 1e-9);
    }

    #[test]
    fn mv_examples() {
        let m = uniform(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 2.0]]);
        assert_eq!(mv_distances(&m, &m).unwrap(), (0.0, 0.0));
        let (dm, dv) = mv_distances(&dirac(&[0.0, 0.0]), &dirac(&[3.0, 4.0])).unwrap();
        assert_eq!((dm, dv), (5.0, 0.0));
        let a = uniform(&[[0.0, 0.0], [2.0, 0.0]]);
        let b = uniform(&[[0.0, 0.0], [0.0, 2.0]]);
        let (dm, dv) = mv_distances(&a, &b).unwrap();
        assert!((dm - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(dv, 0.0);
    }

    #[test]
    fn mv_against_analytic_gaussian() {
        // Four atoms at (+-1, +-1): mean 0, covariance I.
        let m = uniform(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]);
        let (dm, dv) = mv_distances_to_gaussian(&m, &pt(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!((dm, dv), (0.0, 0.0));
        let (dm, dv) = mv_distances_to_gaussian(&m, &pt(&[3.0, 4.0]), 0.25).unwrap();
        assert!((dm - 5.0).abs() < 1e-15 && (dv - 0.75).abs() < 1e-15);
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        uniform(&[[0.0, 0.5], [1.0, 0.0]]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,w\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn dirac_wasserstein_is_euclidean(x in -50.0..50.0f64, y in -50.0..50.0f64, u in -50.0..50.0f64, v in -50.0..50.0f64) {
            let w = wasserstein2(&dirac(&[x, y]), &dirac(&[u, v])).unwrap();
            prop_assert!((w - (pt(&[x, y]) - pt(&[u, v])).norm()).abs() < 1e-9);
        }

        #[test]
        fn distances_symmetric(seed in 0u64..10_000, n in 1usize..7, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_weighted(&mut rng, n), random_weighted(&mut rng, m));
            prop_assert!((wasserstein2(&a, &b).unwrap() - wasserstein2(&b, &a).unwrap()).abs() < 1e-9);
            prop_assert!((mmd_riesz(&a, &b).unwrap() - mmd_riesz(&b, &a).unwrap()).abs() < 1e-12);
            let (p, q) = (mv_distances(&a, &b).unwrap(), mv_distances(&b, &a).unwrap());
            prop_assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
        }
    }
}
