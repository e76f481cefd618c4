//! Minimizing the membership objective over `[0, 1]^T`, thresholding, and scoring.

use rand::Rng;

use crate::error::{Error, Result};
use crate::membership::{similarity_range, MembershipObjective};
use crate::seed::rng_stream;

/// Starting point for the optimizer. Coordinates no term touches keep it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPolicy {
    Constant(f64),
    /// Independent `U[0, 1]` draws per coordinate.
    Uniform { seed: u64 },
}

impl InitPolicy {
    pub fn point(&self, horizon: usize) -> Vec<f64> {
        match *self {
            InitPolicy::Constant(v) => vec![v; horizon],
            InitPolicy::Uniform { seed } => {
                let mut rng = rng_stream(seed, 0);
                (0..horizon).map(|_| rng.random::<f64>()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Relative to each coordinate's curvature, so the update is invariant to rescaling
    /// the terms that touch it.
    pub epsilon: f64,
    pub init: InitPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 500,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epsilon: 1e-8,
            init: InitPolicy::Constant(0.5),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("solver: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("ADAM betas must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if let InitPolicy::Constant(v) = self.init {
            if !(0.0..=1.0).contains(&v) {
                return bad("init value must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// A solution together with its labels on `t = k+1 ..= T-k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipEstimate {
    /// `e[idx]` is the estimate at timepoint `idx + 1`.
    pub e: Vec<f64>,
    pub labels: Vec<bool>,
    pub k: usize,
    /// 1-based timepoints with zero total weight; these keep their initial value.
    pub unconstrained: Vec<usize>,
    /// Objective after each ADAM step; empty for the closed form.
    pub objective_trace: Vec<f64>,
}

impl MembershipEstimate {
    fn new(e: Vec<f64>, k: usize, unconstrained: Vec<usize>, objective_trace: Vec<f64>) -> Self {
        let labels = classify(&e, k);
        Self { e, labels, k, unconstrained, objective_trace }
    }

    /// Label at a 1-based timepoint, if it lies in the scored range.
    pub fn label_at(&self, t: usize) -> Option<bool> {
        similarity_range(self.e.len(), self.k).contains(&t).then(|| self.labels[t - self.k - 1])
    }
}

fn unconstrained(moments: &[(f64, f64)]) -> Vec<usize> {
    moments.iter().enumerate().filter(|(_, m)| m.0 == 0.0).map(|(i, _)| i + 1).collect()
}

/// Exact minimizer: each coordinate is the weighted mean of its targets, or `init`
/// where no weight falls.
pub fn closed_form_minimize(objective: &MembershipObjective, init: &InitPolicy) -> MembershipEstimate {
    let start = init.point(objective.horizon);
    let moments = objective.coordinate_moments();
    let e = moments
        .iter()
        .zip(&start)
        .map(|(&(w, wt), &e0)| if w > 0.0 { (wt / w).clamp(0.0, 1.0) } else { e0 })
        .collect();
    MembershipEstimate::new(e, objective.k, unconstrained(&moments), Vec::new())
}

/// ADAM with projection onto `[0, 1]` after every step.
pub fn adam_minimize(objective: &MembershipObjective, config: &SolverConfig) -> Result<MembershipEstimate> {
    config.validate()?;
    let horizon = objective.horizon;
    let moments = objective.coordinate_moments();
    let eps: Vec<f64> = moments.iter().map(|m| config.epsilon * 2.0 * m.0).collect();
    let mut e = config.init.point(horizon);
    let mut m = vec![0.0; horizon];
    let mut v = vec![0.0; horizon];
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let mut trace = Vec::with_capacity(config.iterations);
    for iter in 1..=config.iterations {
        let g = objective.gradient(&e);
        let c1 = 1.0 - b1.powi(iter as i32);
        let c2 = 1.0 - b2.powi(iter as i32);
        for idx in 0..horizon {
            if !g[idx].is_finite() {
                return Err(Error::NonFiniteGradient { index: idx + 1, iteration: iter });
            }
            m[idx] = b1 * m[idx] + (1.0 - b1) * g[idx];
            v[idx] = b2 * v[idx] + (1.0 - b2) * g[idx] * g[idx];
            let denom = (v[idx] / c2).sqrt() + eps[idx];
            if denom > 0.0 {
                e[idx] = (e[idx] - config.learning_rate * (m[idx] / c1) / denom).clamp(0.0, 1.0);
            }
        }
        trace.push(objective.value(&e));
    }
    Ok(MembershipEstimate::new(e, objective.k, unconstrained(&moments), trace))
}

/// `e_t >= 1/2` for `t = k+1 ..= T-k`.
pub fn classify(e: &[f64], k: usize) -> Vec<bool> {
    let range = similarity_range(e.len(), k);
    e[range.start() - 1..*range.end()].iter().map(|&x| x >= 0.5).collect()
}

/// The slice of a full-length ground truth that [`classify`] scores.
pub fn scored_truth(truth: &[bool], k: usize) -> &[bool] {
    let range = similarity_range(truth.len(), k);
    &truth[range.start() - 1..*range.end()]
}

/// Fraction of agreeing labels.
pub fn accuracy(labels: &[bool], truth: &[bool]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::InvalidInput(format!("{} labels against {} truth values", labels.len(), truth.len())));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("nothing to score".into()));
    }
    let hits = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}
