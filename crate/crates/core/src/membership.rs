//! Quadratic loss terms whose minimizer estimates, per timepoint, whether the particle
//! sits inside a cluster.
//!
//! Every term reads `weight * (e_t - target)^2` with `target` in {0, 1} and `weight` in
//! [0, 1]. Radius terms pull toward "within `R` of the nearest cluster" with a
//! confidence that grows with the distance beyond `R`. Similarity terms compare the
//! particle's sliding-window displacement measure either to the fitted inside-mode
//! Gaussian or to the windowed motion of the nearest cluster, with a threshold `h`
//! estimated by Monte Carlo.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gmm::{ClusterMotion, GmmParams};
use crate::measures::{
    gaussian_draws, gaussian_sample_measure, mmd_riesz, mv_distances, mv_distances_to_gaussian, wasserstein2,
    window_measure, EmpiricalMeasure, WindowSpec,
};
use crate::seed::rng_stream;
use crate::sim::{nearest_cluster, SimulationRecord};
use crate::Point;

/// Distance family used by the similarity loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Mean and covariance-determinant distances, two sub-losses.
    MeanVariance,
    Wasserstein,
    Mmd,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::MeanVariance, DistanceKind::Wasserstein, DistanceKind::Mmd];

    pub fn short_name(self) -> &'static str {
        match self {
            DistanceKind::MeanVariance => "MV",
            DistanceKind::Wasserstein => "WS",
            DistanceKind::Mmd => "MMD",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MV" => Ok(DistanceKind::MeanVariance),
            "WS" | "W2" => Ok(DistanceKind::Wasserstein),
            "MMD" => Ok(DistanceKind::Mmd),
            other => Err(Error::InvalidConfig(format!("unknown distance '{other}' (MV, WS, MMD)"))),
        }
    }
}

/// What the particle's window measure is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// The fitted inside-mode Gaussian `N(mu_in, var_in I)`.
    GaussianReference,
    /// The windowed increments of the most frequent nearest cluster.
    ClosestCluster,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::GaussianReference, Variant::ClosestCluster];

    pub fn short_name(self) -> &'static str {
        match self {
            Variant::GaussianReference => "gaussian",
            Variant::ClosestCluster => "closest",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gaussian-reference" => Ok(Variant::GaussianReference),
            "closest" | "closest-cluster" => Ok(Variant::ClosestCluster),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}' (gaussian, closest)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossTag {
    Radius,
    Similarity,
}

impl LossTag {
    pub fn name(self) -> &'static str {
        match self {
            LossTag::Radius => "radius",
            LossTag::Similarity => "similarity",
        }
    }
}

/// `weight * (e_t - target)^2` at the 1-based timepoint `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTerm {
    pub t: usize,
    pub target: bool,
    pub weight: f64,
    pub tag: LossTag,
}

impl QuadTerm {
    pub fn target_value(&self) -> f64 {
        if self.target {
            1.0
        } else {
            0.0
        }
    }
}

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 at `s <= bound` to 1 at `s >= bound + 1`.
pub fn confidence_f(s: f64, bound: f64) -> f64 {
    if s.is_infinite() && s > 0.0 {
        return 1.0;
    }
    let x = s - bound;
    let (a, b) = (bump(x), bump(1.0 - x));
    if a + b == 0.0 {
        // Only reachable when both bumps underflow, i.e. never for finite inputs.
        return if x >= 0.5 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// `min(1, (s / h - 1)^2)`: zero at the threshold, one at 0 and beyond `2h`.
pub fn confidence_g(s: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("similarity threshold must be positive, got {h}")));
    }
    Ok((s * s / (h * h) - 2.0 * s / h + 1.0).min(1.0))
}

/// One radius term per timepoint: target "within `bound` of the nearest cluster",
/// weight `F(dist)`. With no clusters every distance is infinite.
pub fn radius_terms(record: &SimulationRecord, bound: f64) -> Result<Vec<QuadTerm>> {
    if !(bound > 0.0) {
        return Err(Error::InvalidInput(format!("radius bound must be positive, got {bound}")));
    }
    (0..record.horizon())
        .map(|idx| {
            let dist = if record.n_clusters() == 0 {
                f64::INFINITY
            } else {
                nearest_cluster(&record.particle[idx], &record.centers_at(idx))?.1
            };
            Ok(QuadTerm { t: idx + 1, target: dist <= bound, weight: confidence_f(dist, bound), tag: LossTag::Radius })
        })
        .collect()
}

/// Value of the similarity distance: a scalar, or the (mean, variance) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityDistance {
    Scalar(f64),
    MeanVariance { mean: f64, var: f64 },
}

fn measure_distance(kind: DistanceKind, a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<SimilarityDistance> {
    Ok(match kind {
        DistanceKind::Wasserstein => SimilarityDistance::Scalar(wasserstein2(a, b)?),
        DistanceKind::Mmd => SimilarityDistance::Scalar(mmd_riesz(a, b)?),
        DistanceKind::MeanVariance => {
            let (mean, var) = mv_distances(a, b)?;
            SimilarityDistance::MeanVariance { mean, var }
        }
    })
}

/// The inside-mode Gaussian as a comparand. Sample-based distances see `2k` fixed
/// draws from it; the mean-variance distances use its exact moments.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReference {
    pub mean: Point,
    pub var: f64,
    pub sample: EmpiricalMeasure,
}

impl GaussianReference {
    pub fn new(params: &GmmParams, k: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            mean: params.mu_in.clone(),
            var: params.var_in,
            sample: gaussian_sample_measure(&params.mu_in, params.var_in, 2 * k, seed)?,
        })
    }

    pub fn distance(&self, kind: DistanceKind, measure: &EmpiricalMeasure) -> Result<SimilarityDistance> {
        match kind {
            DistanceKind::MeanVariance => {
                let (mean, var) = mv_distances_to_gaussian(measure, &self.mean, self.var)?;
                Ok(SimilarityDistance::MeanVariance { mean, var })
            }
            _ => measure_distance(kind, measure, &self.sample),
        }
    }
}

/// `h = (E_in + E_out) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEstimate {
    pub h: f64,
    pub e_in: f64,
    pub e_out: f64,
    /// Zero for closed-form thresholds.
    pub trials: usize,
    pub seed: u64,
}

impl ThresholdEstimate {
    pub fn from_means(e_in: f64, e_out: f64, trials: usize, seed: u64) -> Self {
        Self { h: (e_in + e_out) / 2.0, e_in, e_out, trials, seed }
    }
}

/// Thresholds for a distance family; mean-variance carries one per sub-loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Scalar(ThresholdEstimate),
    MeanVariance { mean: ThresholdEstimate, var: ThresholdEstimate },
}

impl Threshold {
    /// The scalar threshold, or the mean sub-loss threshold.
    pub fn primary(&self) -> &ThresholdEstimate {
        match self {
            Threshold::Scalar(t) => t,
            Threshold::MeanVariance { mean, .. } => mean,
        }
    }
}

/// Closed-form mean-variance thresholds: `||mu_in - mu_out|| / 2` for the means and
/// `(var_in + var_out) / 2` for the variances.
fn mean_variance_threshold(params: &GmmParams) -> Threshold {
    Threshold::MeanVariance {
        mean: ThresholdEstimate::from_means(0.0, (&params.mu_in - &params.mu_out).norm(), 0, 0),
        var: ThresholdEstimate::from_means(params.var_in, params.var_out, 0, 0),
    }
}

fn scalar(d: SimilarityDistance) -> f64 {
    match d {
        SimilarityDistance::Scalar(x) => x,
        SimilarityDistance::MeanVariance { mean, .. } => mean,
    }
}

/// Monte-Carlo threshold against the Gaussian reference: `E_in` (`E_out`) is the mean
/// distance from `2k` draws of the inside (outside) mode to the reference.
pub fn threshold_gaussian(
    params: &GmmParams,
    reference: &GaussianReference,
    k: usize,
    kind: DistanceKind,
    trials: usize,
    seed: u64,
) -> Result<Threshold> {
    if kind == DistanceKind::MeanVariance {
        return Ok(mean_variance_threshold(params));
    }
    if trials == 0 || k == 0 {
        return Err(Error::InvalidInput("threshold needs at least one trial and k >= 1".into()));
    }
    let mut in_rng = rng_stream(seed, 0);
    let mut out_rng = rng_stream(seed, 1);
    let (mut sum_in, mut sum_out) = (0.0, 0.0);
    for _ in 0..trials {
        let x_in = EmpiricalMeasure::uniform(gaussian_draws(&mut in_rng, &params.mu_in, params.sigma_in(), 2 * k))?;
        let x_out = EmpiricalMeasure::uniform(gaussian_draws(&mut out_rng, &params.mu_out, params.sigma_out(), 2 * k))?;
        sum_in += scalar(reference.distance(kind, &x_in)?);
        sum_out += scalar(reference.distance(kind, &x_out)?);
    }
    let n = trials as f64;
    Ok(Threshold::Scalar(ThresholdEstimate::from_means(sum_in / n, sum_out / n, trials, seed)))
}

/// Monte-Carlo threshold for the closest-cluster comparison. Per trial, with `2k`
/// draws each: `Y ~ N(m_c, var_c)`, `Z = Y + X` with `X ~ N(0, var_in - var_c)`, and
/// `W ~ N(mu_out, var_out)`; `E_in` averages `d(Y, Z)` and `E_out` averages `d(Y, W)`.
pub fn threshold_closest(
    params: &GmmParams,
    motion: &ClusterMotion,
    k: usize,
    kind: DistanceKind,
    trials: usize,
    seed: u64,
) -> Result<Threshold> {
    if params.var_in < motion.var {
        return Err(Error::NegativeWiggleVariance { var_in: params.var_in, var_c: motion.var });
    }
    if kind == DistanceKind::MeanVariance {
        return Ok(mean_variance_threshold(params));
    }
    if trials == 0 || k == 0 {
        return Err(Error::InvalidInput("threshold needs at least one trial and k >= 1".into()));
    }
    let wiggle_sigma = (params.var_in - motion.var).sqrt();
    let origin = Point::zeros(params.dim());
    let mut cluster_rng = rng_stream(seed, 0);
    let mut wiggle_rng = rng_stream(seed, 1);
    let mut out_rng = rng_stream(seed, 2);
    let (mut sum_in, mut sum_out) = (0.0, 0.0);
    for _ in 0..trials {
        let y = gaussian_draws(&mut cluster_rng, &motion.drift, motion.var.sqrt(), 2 * k);
        let z: Vec<Point> = y
            .iter()
            .zip(gaussian_draws(&mut wiggle_rng, &origin, wiggle_sigma, 2 * k))
            .map(|(y, x)| y + x)
            .collect();
        let w = gaussian_draws(&mut out_rng, &params.mu_out, params.sigma_out(), 2 * k);
        let mu_y = EmpiricalMeasure::uniform(y)?;
        sum_in += scalar(measure_distance(kind, &mu_y, &EmpiricalMeasure::uniform(z)?)?);
        sum_out += scalar(measure_distance(kind, &mu_y, &EmpiricalMeasure::uniform(w)?)?);
    }
    let n = trials as f64;
    Ok(Threshold::Scalar(ThresholdEstimate::from_means(sum_in / n, sum_out / n, trials, seed)))
}

fn check_horizon(horizon: usize, k: usize) -> Result<()> {
    if k == 0 || horizon < 2 * k + 1 {
        return Err(Error::HorizonTooShort { horizon, k });
    }
    Ok(())
}

/// 1-based timepoints that carry similarity terms: `k+1 ..= T-k`.
pub fn similarity_range(horizon: usize, k: usize) -> std::ops::RangeInclusive<usize> {
    k + 1..=horizon.saturating_sub(k)
}

fn push_similarity(terms: &mut Vec<QuadTerm>, t: usize, d: SimilarityDistance, threshold: &Threshold) -> Result<()> {
    let mut push = |d: f64, h: f64| -> Result<()> {
        terms.push(QuadTerm { t, target: d <= h, weight: confidence_g(d, h)?, tag: LossTag::Similarity });
        Ok(())
    };
    match (d, threshold) {
        (SimilarityDistance::Scalar(d), Threshold::Scalar(th)) => push(d, th.h),
        (SimilarityDistance::MeanVariance { mean, var }, Threshold::MeanVariance { mean: hm, var: hv }) => {
            push(mean, hm.h)?;
            push(var, hv.h)
        }
        _ => Err(Error::InvalidInput("distance family and threshold family differ".into())),
    }
}

/// Similarity terms against the Gaussian reference for `t` in `k+1 ..= T-k`.
pub fn similarity_terms_gaussian(
    record: &SimulationRecord,
    reference: &GaussianReference,
    k: usize,
    kind: DistanceKind,
    threshold: &Threshold,
) -> Result<Vec<QuadTerm>> {
    let horizon = record.horizon();
    check_horizon(horizon, k)?;
    let mut terms = Vec::new();
    for t in similarity_range(horizon, k) {
        let window = window_measure(&record.particle, WindowSpec::new(k, t, horizon))?;
        push_similarity(&mut terms, t, reference.distance(kind, &window)?, threshold)?;
    }
    Ok(terms)
}

/// Nearest cluster index at every timepoint, recomputed from positions.
pub fn observed_nearest(record: &SimulationRecord) -> Result<Vec<usize>> {
    (0..record.horizon())
        .map(|idx| Ok(nearest_cluster(&record.particle[idx], &record.centers_at(idx))?.0))
        .collect()
}

/// Most frequent value, ties going to the smallest.
pub fn modal_index(indices: &[usize]) -> Option<usize> {
    let max = *indices.iter().max()?;
    let mut counts = vec![0usize; max + 1];
    for &i in indices {
        counts[i] += 1;
    }
    // max_by_key keeps the last maximum; scan in reverse so the smallest index wins.
    counts.iter().enumerate().rev().max_by_key(|&(_, c)| *c).map(|(i, _)| i)
}

/// Similarity terms against the windowed motion of the modal nearest cluster.
pub fn similarity_terms_closest(
    record: &SimulationRecord,
    k: usize,
    kind: DistanceKind,
    threshold: &Threshold,
) -> Result<Vec<QuadTerm>> {
    let horizon = record.horizon();
    check_horizon(horizon, k)?;
    if record.n_clusters() == 0 {
        return Err(Error::NoClusters);
    }
    let nearest = observed_nearest(record)?;
    let mut terms = Vec::new();
    for t in similarity_range(horizon, k) {
        let spec = WindowSpec::new(k, t, horizon);
        let range = spec.increment_range()?;
        let window_ids: Vec<usize> = range.map(|j| nearest[j - 1]).collect();
        let modal = modal_index(&window_ids).expect("window is non-empty");
        let particle = window_measure(&record.particle, spec)?;
        let cluster = window_measure(&record.clusters[modal], spec)?;
        push_similarity(&mut terms, t, measure_distance(kind, &particle, &cluster)?, threshold)?;
    }
    Ok(terms)
}

/// `sum_terms beta_tag * weight * (e_t - target)^2` over `e` in `[0, 1]^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipObjective {
    pub horizon: usize,
    pub k: usize,
    pub beta_r: f64,
    pub beta_s: f64,
    pub terms: Vec<QuadTerm>,
}

impl MembershipObjective {
    pub fn beta(&self, tag: LossTag) -> f64 {
        match tag {
            LossTag::Radius => self.beta_r,
            LossTag::Similarity => self.beta_s,
        }
    }

    /// Objective value; `e[idx]` is the estimate at timepoint `idx + 1`.
    pub fn value(&self, e: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|q| self.beta(q.tag) * q.weight * (e[q.t - 1] - q.target_value()).powi(2))
            .sum()
    }

    pub fn gradient(&self, e: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.horizon];
        for q in &self.terms {
            g[q.t - 1] += 2.0 * self.beta(q.tag) * q.weight * (e[q.t - 1] - q.target_value());
        }
        g
    }

    /// Per-coordinate `(sum beta w, sum beta w target)`: the diagonal curvature over two
    /// and the linear coefficient of the separable quadratic.
    pub fn coordinate_moments(&self) -> Vec<(f64, f64)> {
        let mut acc = vec![(0.0, 0.0); self.horizon];
        for q in &self.terms {
            let bw = self.beta(q.tag) * q.weight;
            acc[q.t - 1].0 += bw;
            acc[q.t - 1].1 += bw * q.target_value();
        }
        acc
    }
}

/// Tags the terms with their coefficients and checks every structural invariant.
pub fn assemble_objective(
    radius: Vec<QuadTerm>,
    similarity: Vec<QuadTerm>,
    beta_r: f64,
    beta_s: f64,
    horizon: usize,
    k: usize,
) -> Result<MembershipObjective> {
    if !(beta_r >= 0.0 && beta_s >= 0.0) {
        return Err(Error::InvalidInput(format!("loss coefficients must be non-negative: {beta_r}, {beta_s}")));
    }
    let sim_range = similarity_range(horizon, k);
    for q in radius.iter().chain(&similarity) {
        if !(0.0..=1.0).contains(&q.weight) {
            return Err(Error::InvalidInput(format!("term weight {} outside [0, 1] at t={}", q.weight, q.t)));
        }
        let in_range = match q.tag {
            LossTag::Radius => (1..=horizon).contains(&q.t),
            LossTag::Similarity => sim_range.contains(&q.t),
        };
        if !in_range {
            return Err(Error::InvalidInput(format!("{} term at t={} out of range", q.tag.name(), q.t)));
        }
    }
    if radius.iter().any(|q| q.tag != LossTag::Radius) || similarity.iter().any(|q| q.tag != LossTag::Similarity) {
        return Err(Error::InvalidInput("term tags do not match their loss".into()));
    }
    let mut terms = radius;
    terms.extend(similarity);
    Ok(MembershipObjective { horizon, k, beta_r, beta_s, terms })
}

/// Draws a random but valid objective; for solver property tests and examples.
pub fn random_objective<R: Rng>(rng: &mut R, horizon: usize, k: usize) -> MembershipObjective {
    let radius = (1..=horizon)
        .map(|t| QuadTerm { t, target: rng.random(), weight: rng.random(), tag: LossTag::Radius })
        .collect();
    let similarity = similarity_range(horizon, k)
        .map(|t| QuadTerm { t, target: rng.random(), weight: rng.random(), tag: LossTag::Similarity })
        .collect();
    let beta_r = rng.random_range(0.0..2.0);
    let beta_s = rng.random_range(0.0..2.0);
    assemble_objective(radius, similarity, beta_r, beta_s, horizon, k).expect("random terms are valid")
}
