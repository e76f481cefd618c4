//! Two-mode isotropic Gaussian mixture for displacement increments, fitted by EM.

use crate::error::{Error, Result};
use crate::sim::path_increments;
use crate::Point;

/// Variances below this abort the fit.
pub const COLLAPSE_VARIANCE: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// `alpha_in N(mu_in, var_in I) + alpha_out N(mu_out, var_out I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub alpha_in: f64,
    pub alpha_out: f64,
    pub mu_in: Point,
    pub mu_out: Point,
    pub var_in: f64,
    pub var_out: f64,
}

impl GmmParams {
    pub fn dim(&self) -> usize {
        self.mu_in.len()
    }

    pub fn sigma_in(&self) -> f64 {
        self.var_in.sqrt()
    }

    pub fn sigma_out(&self) -> f64 {
        self.var_out.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_in >= 0.0
            && self.alpha_out >= 0.0
            && (self.alpha_in + self.alpha_out - 1.0).abs() <= 1e-12
            && self.var_in > 0.0
            && self.var_out > 0.0
            && self.mu_in.len() == self.mu_out.len()
            && !self.mu_in.is_empty();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid mixture parameters: {self:?}")))
        }
    }

    /// The same mixture with the two components exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            alpha_in: self.alpha_out,
            alpha_out: self.alpha_in,
            mu_in: self.mu_out.clone(),
            mu_out: self.mu_in.clone(),
            var_in: self.var_out,
            var_out: self.var_in,
        }
    }

    /// Orders components so that `var_in <= var_out`.
    pub fn labeled_by_variance(self) -> Self {
        if self.var_in > self.var_out {
            self.swapped()
        } else {
            self
        }
    }

    fn components(&self) -> [(f64, &Point, f64); 2] {
        [
            (self.alpha_in, &self.mu_in, self.var_in),
            (self.alpha_out, &self.mu_out, self.var_out),
        ]
    }

    /// Deterministic starting point: equal weights, means at the sample mean shifted by
    /// plus/minus one sample standard deviation along the first axis, variances at half
    /// and twice the pooled per-axis sample variance.
    pub fn initial_guess(increments: &[Point]) -> Result<Self> {
        let (mean, pooled_var) = sample_moments(increments)?;
        let mut shift = Point::zeros(mean.len());
        shift[0] = pooled_var.sqrt();
        let pooled_var = pooled_var.max(COLLAPSE_VARIANCE * 10.0);
        Ok(Self {
            alpha_in: 0.5,
            alpha_out: 0.5,
            mu_in: &mean + &shift,
            mu_out: &mean - &shift,
            var_in: 0.5 * pooled_var,
            var_out: 2.0 * pooled_var,
        })
    }
}

/// Sample mean and pooled per-axis (population) variance `mean ||x - m||^2 / d`.
fn sample_moments(xs: &[Point]) -> Result<(Point, f64)> {
    let first = xs.first().ok_or_else(|| Error::InvalidInput("no increments".into()))?;
    let n = xs.len() as f64;
    let dim = first.len();
    let mean = xs.iter().fold(Point::zeros(dim), |acc, x| acc + x) / n;
    let var = xs.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / (n * dim as f64);
    Ok((mean, var))
}

/// Isotropic Gaussian density `(2 pi var)^{-d/2} exp(-||x - mu||^2 / (2 var))`.
pub fn gaussian_pdf(x: &Point, mu: &Point, var: f64) -> Result<f64> {
    if !(var > 0.0) {
        return Err(Error::InvalidInput(format!("variance must be positive, got {var}")));
    }
    Ok(ln_gaussian_pdf(x, mu, var).exp())
}

fn ln_gaussian_pdf(x: &Point, mu: &Point, var: f64) -> f64 {
    let d = x.len() as f64;
    -0.5 * d * (2.0 * std::f64::consts::PI * var).ln() - (x - mu).norm_squared() / (2.0 * var)
}

/// Per-sample posterior membership `[in, out]` and the total log-likelihood.
pub fn responsibilities(xs: &[Point], params: &GmmParams) -> (Vec<[f64; 2]>, f64) {
    let comps = params.components();
    let mut loglik = 0.0;
    let resp = xs
        .iter()
        .map(|x| {
            let logs = comps.map(|(a, mu, var)| a.ln() + ln_gaussian_pdf(x, mu, var));
            let top = logs[0].max(logs[1]);
            let norm = top + ((logs[0] - top).exp() + (logs[1] - top).exp()).ln();
            loglik += norm;
            logs.map(|l| (l - norm).exp())
        })
        .collect();
    (resp, loglik)
}

/// Closed-form maximizer of the expected complete-data log-likelihood for fixed
/// responsibilities.
pub fn m_step(xs: &[Point], resp: &[[f64; 2]]) -> GmmParams {
    let n = xs.len() as f64;
    let dim = xs[0].len();
    let mut out: [(f64, Point, f64); 2] = Default::default();
    for (j, slot) in out.iter_mut().enumerate() {
        let mass: f64 = resp.iter().map(|r| r[j]).sum();
        let mu = xs
            .iter()
            .zip(resp)
            .fold(Point::zeros(dim), |acc, (x, r)| acc + x * r[j])
            / mass;
        let var = xs
            .iter()
            .zip(resp)
            .map(|(x, r)| r[j] * (x - &mu).norm_squared())
            .sum::<f64>()
            / (mass * dim as f64);
        *slot = (mass / n, mu, var);
    }
    let [(alpha_in, mu_in, var_in), (alpha_out, mu_out, var_out)] = out;
    GmmParams { alpha_in, alpha_out, mu_in, mu_out, var_in, var_out }
}

/// Outcome of an EM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFitReport {
    pub params: GmmParams,
    /// Log-likelihood of every parameter iterate, starting with `init`.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Expectation-maximization on `increments`, stopping once an iteration gains no more
/// than `tol` in log-likelihood or after `max_iter` M-steps. Output components are
/// labeled so that `var_in <= var_out`.
pub fn em_fit(increments: &[Point], init: &GmmParams, tol: f64, max_iter: usize) -> Result<EmFitReport> {
    if increments.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "EM needs at least 2 increments, got {}",
            increments.len()
        )));
    }
    init.validate()?;
    if increments.iter().any(|x| x.len() != init.dim()) {
        return Err(Error::InvalidInput("increment dimension differs from the initial means".into()));
    }

    let mut params = init.clone();
    let (mut resp, mut loglik) = responsibilities(increments, &params);
    let mut trace = vec![loglik];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let next = m_step(increments, &resp);
        iterations += 1;
        for (component, variance) in [("in", next.var_in), ("out", next.var_out)] {
            if !(variance >= COLLAPSE_VARIANCE) {
                return Err(Error::DegenerateMixture { component, variance, iteration: iterations });
            }
        }
        let (next_resp, next_loglik) = responsibilities(increments, &next);
        params = next;
        resp = next_resp;
        trace.push(next_loglik);
        let gain = next_loglik - loglik;
        loglik = next_loglik;
        if gain <= tol {
            converged = true;
            break;
        }
    }

    Ok(EmFitReport {
        params: params.labeled_by_variance(),
        loglik_trace: trace,
        iterations,
        converged,
    })
}

/// [`em_fit`] with the default initialization and stopping rule.
pub fn fit_increments(increments: &[Point]) -> Result<EmFitReport> {
    let init = GmmParams::initial_guess(increments)?;
    em_fit(increments, &init, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Maximum-likelihood drift and isotropic step variance of the cluster motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMotion {
    pub drift: Point,
    pub var: f64,
}

/// Pools the increments of every cluster path: `drift` is their mean and `var` the mean
/// of `||dc - drift||^2 / d`.
pub fn estimate_cluster_motion(cluster_paths: &[Vec<Point>]) -> Result<ClusterMotion> {
    let increments: Vec<Point> = cluster_paths.iter().flat_map(|p| path_increments(p)).collect();
    if increments.is_empty() {
        return Err(Error::InvalidInput(
            "cluster motion needs at least two positions on some path".into(),
        ));
    }
    let (drift, var) = sample_moments(&increments)?;
    Ok(ClusterMotion { drift, var })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_stream;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn pt(xs: &[f64]) -> Point {
        Point::from_column_slice(xs)
    }

    fn gaussian_cloud(n: usize, mean: &[f64], sigma: f64, seed: u64) -> Vec<Point> {
        let mut rng = rng_stream(seed, 0);
        (0..n)
            .map(|_| Point::from_fn(mean.len(), |i, _| mean[i] + sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    #[test]
    fn pdf_anchor_values() {
        let o = pt(&[0.0, 0.0]);
        assert!((gaussian_pdf(&o, &o, 1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let x = pt(&[1.0, 1.0]);
        assert!((gaussian_pdf(&x, &o, 1.0).unwrap() - (-1.0f64).exp() / (2.0 * PI)).abs() < 1e-15);
        assert!(gaussian_pdf(&x, &o, 0.0).is_err());
        assert!(gaussian_pdf(&x, &o, -1.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Midpoint rule on [-8 sigma, 8 sigma]^2.
        let (mu, var) = (pt(&[0.3, -0.2]), 0.49_f64);
        let sigma: f64 = var.sqrt();
        let cells = 400;
        let h = 16.0 * sigma / cells as f64;
        let mut total = 0.0;
        for i in 0..cells {
            for j in 0..cells {
                let x = pt(&[
                    mu[0] - 8.0 * sigma + (i as f64 + 0.5) * h,
                    mu[1] - 8.0 * sigma + (j as f64 + 0.5) * h,
                ]);
                total += gaussian_pdf(&x, &mu, var).unwrap() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn rejects_bad_input() {
        let init = GmmParams::initial_guess(&[pt(&[0.0, 0.0]), pt(&[1.0, 1.0])]).unwrap();
        assert!(em_fit(&[], &init, 1e-8, 10).is_err());
        assert!(em_fit(&[pt(&[0.0, 0.0])], &init, 1e-8, 10).is_err());
        assert!(GmmParams::initial_guess(&[]).is_err());
    }

    #[test]
    fn identical_points_collapse() {
        let xs = vec![pt(&[1.0, 1.0]); 20];
        let init = GmmParams {
            alpha_in: 0.5,
            alpha_out: 0.5,
            mu_in: pt(&[1.0, 1.0]),
            mu_out: pt(&[0.0, 0.0]),
            var_in: 1.0,
            var_out: 2.0,
        };
        assert!(matches!(em_fit(&xs, &init, 1e-8, 50), Err(Error::DegenerateMixture { .. })));
    }

    #[test]
    fn single_gaussian_is_monotone_and_centered() {
        let xs = gaussian_cloud(2000, &[0.4, -0.1], 0.6, 3);
        let rep = fit_increments(&xs).unwrap();
        for w in rep.loglik_trace.windows(2) {
            assert!(w[1] - w[0] >= -1e-9);
        }
        let (mean, _) = sample_moments(&xs).unwrap();
        let p = &rep.params;
        let mixture_mean = &p.mu_in * p.alpha_in + &p.mu_out * p.alpha_out;
        // The responsibility-weighted means always average back to the sample mean.
        assert!((mixture_mean - &mean).amax() < 1e-9);
        // Both components sit on the single true law.
        assert!((p.var_in - 0.36).abs() < 0.05 && (p.var_out - 0.36).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn separated_clouds_match_per_cloud_mle() {
        let mut xs = gaussian_cloud(300, &[0.0, 0.0], 0.1, 1);
        let far = gaussian_cloud(700, &[10.0, 10.0], 0.1, 2);
        xs.extend(far.iter().cloned());
        let rep = fit_increments(&xs).unwrap();
        assert!(rep.converged);
        let (m_near, _) = sample_moments(&xs[..300]).unwrap();
        let (m_far, _) = sample_moments(&far).unwrap();
        let p = &rep.params;
        let (near, far_mu, near_w) = if p.mu_in[0] < p.mu_out[0] {
            (&p.mu_in, &p.mu_out, p.alpha_in)
        } else {
            (&p.mu_out, &p.mu_in, p.alpha_out)
        };
        assert!((near - &m_near).amax() < 0.05);
        assert!((far_mu - &m_far).amax() < 0.05);
        assert!((near_w - 0.3).abs() < 0.02);
    }

    #[test]
    fn components_ordered_by_variance() {
        let mut xs = gaussian_cloud(600, &[0.3, 0.3], 0.5, 8);
        xs.extend(gaussian_cloud(400, &[0.0, 0.0], 1.0, 9));
        let init = GmmParams::initial_guess(&xs).unwrap();
        let a = em_fit(&xs, &init, 1e-8, 500).unwrap();
        let b = em_fit(&xs, &init.swapped(), 1e-8, 500).unwrap();
        assert!(a.params.var_in <= a.params.var_out);
        assert_eq!(a.params, b.params);
        assert_eq!(a.loglik_trace, b.loglik_trace);
    }

    #[test]
    fn responsibilities_normalized() {
        let xs = gaussian_cloud(500, &[0.0, 0.0], 0.7, 4);
        let init = GmmParams::initial_guess(&xs).unwrap();
        let (resp, _) = responsibilities(&xs, &init);
        for r in resp {
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn m_step_is_a_local_maximum() {
        let mut xs = gaussian_cloud(400, &[0.3, 0.3], 0.5, 10);
        xs.extend(gaussian_cloud(300, &[0.0, 0.0], 0.7, 11));
        let init = GmmParams::initial_guess(&xs).unwrap();
        let (resp, _) = responsibilities(&xs, &init);
        let best = m_step(&xs, &resp);
        let objective = |j: usize, mu: &Point, var: f64| -> f64 {
            xs.iter().zip(&resp).map(|(x, r)| r[j] * ln_gaussian_pdf(x, mu, var)).sum()
        };
        let step = 1e-3;
        for (j, mu, var) in [(0, &best.mu_in, best.var_in), (1, &best.mu_out, best.var_out)] {
            let at = objective(j, mu, var);
            for axis in 0..2 {
                for sign in [-1.0, 1.0] {
                    let mut moved = mu.clone();
                    moved[axis] += sign * step;
                    assert!(objective(j, &moved, var) <= at);
                }
            }
            for sign in [-1.0, 1.0] {
                assert!(objective(j, mu, var + sign * step) <= at);
            }
        }
    }

    #[test]
    fn cluster_motion_examples() {
        let path = vec![pt(&[0.0, 0.0]), pt(&[1.0, 1.0]), pt(&[2.0, 2.0])];
        let m = estimate_cluster_motion(&[path]).unwrap();
        assert_eq!(m.drift, pt(&[1.0, 1.0]));
        assert_eq!(m.var, 0.0);

        let m = estimate_cluster_motion(&[vec![pt(&[0.5, 0.0]), pt(&[1.0, 2.0])]]).unwrap();
        assert_eq!(m.drift, pt(&[0.5, 2.0]));
        assert_eq!(m.var, 0.0);

        assert!(estimate_cluster_motion(&[vec![pt(&[0.0, 0.0])]]).is_err());
        assert!(estimate_cluster_motion(&[]).is_err());
    }

    #[test]
    fn cluster_motion_law_of_large_numbers() {
        let steps = gaussian_cloud(100_000, &[0.3, 0.3], 0.5, 12);
        let mut path = vec![pt(&[0.0, 0.0])];
        for s in &steps {
            let next = path.last().unwrap() + s;
            path.push(next);
        }
        let m = estimate_cluster_motion(&[path]).unwrap();
        assert!((&m.drift - pt(&[0.3, 0.3])).amax() < 0.01);
        assert!((m.var - 0.25).abs() < 0.01);
    }
}
