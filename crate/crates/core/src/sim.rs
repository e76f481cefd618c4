//! Seeded generation of particle and cluster trajectories.
//!
//! Clusters are balls of a common radius whose centers perform a drifted Brownian
//! motion. The particle moves freely with its own law while outside every ball; once
//! inside, it is carried by the nearest cluster plus a small isotropic wiggle.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::{hash64, rng_stream, Stage};
use crate::Point;

/// Default within-cluster wiggle. Small against the radius, so a captured particle stays
/// carried for many steps.
pub const DEFAULT_WIGGLE_SIGMA: f64 = 0.05;

/// Parameters of one simulated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    /// Number of recorded timepoints `T`.
    pub horizon: usize,
    pub n_clusters: usize,
    pub radius: f64,
    /// Cluster centers start uniformly in `[-arena, arena]^dim`.
    pub arena: f64,
    pub cluster_drift: Point,
    pub cluster_sigma: f64,
    /// Particle wiggle while carried by a cluster.
    pub wiggle_sigma: f64,
    pub outside_drift: Point,
    pub outside_sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::from_mixture(0.5, 0.7, &[0.3, 0.3], &[0.0, 0.0])
    }
}

impl SimConfig {
    /// Builds a scene from mixture-level parameters. The inside mode `N(mu_in, sigma_in^2)`
    /// is split into wiggle [`DEFAULT_WIGGLE_SIGMA`] and cluster motion
    /// `sigma_c = sqrt(sigma_in^2 - sigma_pc^2)`.
    pub fn from_mixture(sigma_in: f64, sigma_out: f64, mu_in: &[f64], mu_out: &[f64]) -> Self {
        Self {
            dim: mu_in.len(),
            horizon: 1000,
            n_clusters: 10,
            radius: 0.7,
            arena: 20.0,
            cluster_drift: DVector::from_column_slice(mu_in),
            cluster_sigma: (sigma_in.powi(2) - DEFAULT_WIGGLE_SIGMA.powi(2)).max(0.0).sqrt(),
            wiggle_sigma: DEFAULT_WIGGLE_SIGMA.min(sigma_in),
            outside_drift: DVector::from_column_slice(mu_out),
            outside_sigma: sigma_out,
            seed: 0,
        }
    }

    /// Re-splits the inside standard deviation `sigma_in` so that the wiggle is `wiggle_sigma`.
    pub fn with_inside_split(mut self, sigma_in: f64, wiggle_sigma: f64) -> Self {
        self.wiggle_sigma = wiggle_sigma.min(sigma_in);
        self.cluster_sigma = (sigma_in.powi(2) - self.wiggle_sigma.powi(2)).sqrt();
        self
    }

    /// Variance of the inside displacement mode, `sigma_c^2 + sigma_pc^2`.
    pub fn inside_variance(&self) -> f64 {
        self.cluster_sigma.powi(2) + self.wiggle_sigma.powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if self.horizon < 2 {
            return bad(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if !(self.radius > 0.0) {
            return bad(format!("cluster radius must be positive, got {}", self.radius));
        }
        if !(self.arena > 0.0) {
            return bad(format!("arena half-width must be positive, got {}", self.arena));
        }
        if self.cluster_drift.len() != self.dim || self.outside_drift.len() != self.dim {
            return bad(format!("drift vectors must have dimension {}", self.dim));
        }
        for (name, s) in [
            ("cluster_sigma", self.cluster_sigma),
            ("wiggle_sigma", self.wiggle_sigma),
            ("outside_sigma", self.outside_sigma),
        ] {
            if !(s >= 0.0) || !s.is_finite() {
                return bad(format!("{name} must be a finite non-negative number, got {s}"));
            }
        }
        // Without clusters there is no cluster law to compare against.
        if self.n_clusters > 0 && !(self.outside_sigma > self.cluster_sigma) {
            return bad(format!(
                "outside_sigma ({}) must exceed cluster_sigma ({})",
                self.outside_sigma, self.cluster_sigma
            ));
        }
        Ok(())
    }
}

/// A complete simulated run with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub particle: Vec<Point>,
    /// `clusters[n][t]` is the center of cluster `n` at time `t`.
    pub clusters: Vec<Vec<Point>>,
    /// Whether the particle was inside some cluster at time `t` (before stepping).
    pub inside: Vec<bool>,
    pub nearest: Vec<Option<usize>>,
}

impl SimulationRecord {
    pub fn horizon(&self) -> usize {
        self.particle.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn dim(&self) -> usize {
        self.particle.first().map_or(0, |p| p.len())
    }

    /// Cluster centers at time index `t` (0-based).
    pub fn centers_at(&self, t: usize) -> Vec<Point> {
        self.clusters.iter().map(|path| path[t].clone()).collect()
    }

    /// Particle displacements `p[t+1] - p[t]`, `T - 1` of them.
    pub fn increments(&self) -> Vec<Point> {
        path_increments(&self.particle)
    }

    /// Checks the structural invariants; used after import.
    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        if self.inside.len() != horizon || self.nearest.len() != horizon {
            return Err(Error::InvalidInput("label sequences must match the particle path length".into()));
        }
        if self.clusters.iter().any(|c| c.len() != horizon) {
            return Err(Error::InvalidInput("every cluster path must have length T".into()));
        }
        for (t, (inside, nearest)) in self.inside.iter().zip(&self.nearest).enumerate() {
            match nearest {
                Some(n) if !inside || *n >= self.n_clusters() => {
                    return Err(Error::InvalidInput(format!("inconsistent nearest label at t={t}")))
                }
                None if *inside => {
                    return Err(Error::InvalidInput(format!("inside at t={t} without a nearest cluster")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub(crate) fn path_increments(path: &[Point]) -> Vec<Point> {
    path.windows(2).map(|w| &w[1] - &w[0]).collect()
}

/// Index and distance of the closest center; ties go to the smallest index.
pub fn nearest_cluster(p: &Point, centers: &[Point]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (n, c) in centers.iter().enumerate() {
        let dist = (p - c).norm();
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((n, dist));
        }
    }
    best.ok_or(Error::NoClusters)
}

fn standard_normal_vector<R: Rng>(rng: &mut R, dim: usize) -> Point {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Runs the scene. The particle consumes stream 0 of `config.seed`; cluster `n` owns
/// stream `n + 1`, so the particle's draws do not depend on how many clusters exist.
pub fn simulate(config: &SimConfig) -> Result<SimulationRecord> {
    config.validate()?;
    let dim = config.dim;
    let horizon = config.horizon;

    let mut particle_rng = rng_stream(config.seed, 0);
    let mut cluster_rngs: Vec<_> = (0..config.n_clusters)
        .map(|n| rng_stream(config.seed, n as u64 + 1))
        .collect();

    let mut centers: Vec<Point> = cluster_rngs
        .iter_mut()
        .map(|rng| DVector::from_fn(dim, |_, _| config.arena * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    let mut p: Point = DVector::zeros(dim);

    let mut particle = Vec::with_capacity(horizon);
    let mut clusters: Vec<Vec<Point>> = vec![Vec::with_capacity(horizon); config.n_clusters];
    let mut inside = Vec::with_capacity(horizon);
    let mut nearest = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let carrier = match nearest_cluster(&p, &centers) {
            Ok((n, dist)) if dist <= config.radius => Some(n),
            Ok(_) | Err(Error::NoClusters) => None,
            Err(e) => return Err(e),
        };
        particle.push(p.clone());
        for (path, c) in clusters.iter_mut().zip(&centers) {
            path.push(c.clone());
        }
        inside.push(carrier.is_some());
        nearest.push(carrier);

        if t + 1 == horizon {
            break;
        }

        let z = standard_normal_vector(&mut particle_rng, dim);
        let carried = carrier.map(|n| centers[n].clone());
        for (c, rng) in centers.iter_mut().zip(cluster_rngs.iter_mut()) {
            *c += &config.cluster_drift;
            for x in c.iter_mut() {
                *x += config.cluster_sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }

        match (carrier, carried) {
            (Some(n), Some(before)) => {
                p = &p + z * config.wiggle_sigma + (&centers[n] - before);
            }
            _ => p = &p + &config.outside_drift + z * config.outside_sigma,
        }
    }

    Ok(SimulationRecord { particle, clusters, inside, nearest })
}

/// Fraction of timepoints at which the particle is inside a cluster.
pub fn ground_truth_fraction(record: &SimulationRecord) -> f64 {
    if record.inside.is_empty() {
        return 0.0;
    }
    record.inside.iter().filter(|&&b| b).count() as f64 / record.inside.len() as f64
}

/// Mean inside-fraction over `runs` simulations of `config` with the arena set to `arena`.
/// Run seeds come from `calibration_seed`, so repeated calls share random numbers.
pub fn mean_inside_fraction(config: &SimConfig, arena: f64, runs: usize, calibration_seed: u64) -> Result<f64> {
    let fractions = (0..runs)
        .into_par_iter()
        .map(|run| {
            let cfg = SimConfig {
                arena,
                seed: hash64(calibration_seed, run as u64, Stage::Calibration),
                ..config.clone()
            };
            simulate(&cfg).map(|r| ground_truth_fraction(&r))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(fractions.iter().sum::<f64>() / runs.max(1) as f64)
}

/// Bisects the arena half-width in `[lo, hi]` until the mean inside-fraction over `runs`
/// calibration simulations matches `target`. Larger arenas spread clusters out, so the
/// fraction falls as the arena grows.
pub fn calibrate_arena(
    config: &SimConfig,
    target: f64,
    (mut lo, mut hi): (f64, f64),
    runs: usize,
    calibration_seed: u64,
) -> Result<f64> {
    if !(0.0 < lo && lo < hi) {
        return Err(Error::InvalidConfig(format!("bad arena bracket [{lo}, {hi}]")));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mean_inside_fraction(config, mid, runs, calibration_seed)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
