//! Seeded experiment runs: simulate, fit, build the objective, solve, score.
//!
//! Every random stream of run `i` is keyed by `(master_seed, i, stage)`, so a report is a
//! pure function of its [`ExperimentConfig`] and adding runs never changes earlier ones.

mod config;
mod tables;

pub use config::{parse_config, parse_config_file, parse_config_over, ConfigFile};
pub use tables::{
    reproduce_table1, reproduce_table2, table1_rows, table2_base, table2_columns, table2_set_config, table2_sets, reference_scene, wide_outside_scene, MixtureSummary,
    Table1Report, Table1Row, Table1RowReport, Table2Cell, Table2Report, Table2Set, SCENE_CLUSTERS, SCENE_WIGGLE,
    TABLE2_BETAS,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{estimate_cluster_motion, fit_increments, ClusterMotion, GmmParams};
use crate::membership::{
    assemble_objective, radius_terms, similarity_terms_closest, similarity_terms_gaussian, threshold_closest,
    threshold_gaussian, DistanceKind, GaussianReference, QuadTerm, Threshold, Variant,
};
use crate::measures::WindowSpec;
use crate::seed::{hash64, Stage};
use crate::sim::{ground_truth_fraction, simulate, SimConfig, SimulationRecord};
use crate::solve::{accuracy, adam_minimize, scored_truth, InitPolicy, MembershipEstimate, SolverConfig};

/// Default upper bound `R` on the cluster radius used by the radius loss.
pub const DEFAULT_RADIUS_BOUND: f64 = 1.2;
pub const DEFAULT_RUNS: usize = 20;
pub const DEFAULT_TRIALS: usize = 2000;

/// One cell of the evaluation grid and the scene it runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    /// `R`, the known upper bound on the cluster radius.
    pub radius_bound: f64,
    /// Window half-width.
    pub k: usize,
    pub distance: DistanceKind,
    pub variant: Variant,
    pub beta_r: f64,
    pub beta_s: f64,
    pub runs: usize,
    /// Monte-Carlo trials per threshold estimate.
    pub trials: usize,
    pub master_seed: u64,
    /// With [`InitPolicy::Uniform`], the seed is re-derived per run from `master_seed`.
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: reference_scene(),
            radius_bound: DEFAULT_RADIUS_BOUND,
            k: WindowSpec::DEFAULT_HALF_WIDTH,
            distance: DistanceKind::Wasserstein,
            variant: Variant::GaussianReference,
            beta_r: 1.0,
            beta_s: 1.0,
            runs: DEFAULT_RUNS,
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.solver.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.radius_bound > 0.0) {
            return Err(Error::InvalidConfig(format!("radius bound must be positive, got {}", self.radius_bound)));
        }
        if !(self.beta_r >= 0.0 && self.beta_s >= 0.0) {
            return Err(Error::InvalidConfig("loss coefficients must be non-negative".into()));
        }
        if self.k == 0 || self.sim.horizon < 2 * self.k + 1 {
            return Err(Error::HorizonTooShort { horizon: self.sim.horizon, k: self.k });
        }
        if self.variant == Variant::ClosestCluster && self.beta_s > 0.0 && self.sim.n_clusters == 0 {
            return Err(Error::InvalidConfig("closest-cluster similarity needs at least one cluster".into()));
        }
        Ok(())
    }

    /// Non-fatal oddities worth printing next to a report.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.radius_bound < self.sim.radius {
            out.push(format!(
                "radius bound R={} is below the simulated radius r={}",
                self.radius_bound, self.sim.radius
            ));
        }
        out
    }

    pub fn sim_for_run(&self, run: usize) -> SimConfig {
        SimConfig { seed: hash64(self.master_seed, run as u64, Stage::Simulation), ..self.sim.clone() }
    }

    pub fn solver_for_run(&self, run: usize) -> SolverConfig {
        let init = match self.solver.init {
            InitPolicy::Uniform { .. } => {
                InitPolicy::Uniform { seed: hash64(self.master_seed, run as u64, Stage::SolverInit) }
            }
            constant => constant,
        };
        SolverConfig { init, ..self.solver }
    }
}

/// Everything computed for one run before the objective is weighted.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub run: usize,
    pub record: SimulationRecord,
    pub params: GmmParams,
    pub em_iterations: usize,
    /// Only needed by the closest-cluster variant.
    pub motion: Option<ClusterMotion>,
}

impl RunContext {
    /// Simulates and fits run `run` of `config`.
    pub fn prepare(config: &ExperimentConfig, run: usize) -> Result<Self> {
        let record = simulate(&config.sim_for_run(run))?;
        let fit = fit_increments(&record.increments())?;
        let motion = if record.n_clusters() > 0 { Some(estimate_cluster_motion(&record.clusters)?) } else { None };
        Ok(Self { run, record, params: fit.params, em_iterations: fit.iterations, motion })
    }

    /// Cluster motion for the closest-cluster thresholds, with its variance capped at the
    /// fitted inside variance; the flag is set when the cap applied. A particle that never
    /// leaves its cluster gives a one-mode sample whose EM split underestimates `var_in`.
    pub fn closest_motion(&self) -> Result<(ClusterMotion, bool)> {
        let motion = self.motion.as_ref().ok_or(Error::NoClusters)?;
        if motion.var > self.params.var_in {
            Ok((ClusterMotion { drift: motion.drift.clone(), var: self.params.var_in }, true))
        } else {
            Ok((motion.clone(), false))
        }
    }

    /// Threshold and similarity terms for one (variant, distance) pair.
    pub fn similarity(&self, config: &ExperimentConfig, variant: Variant, kind: DistanceKind) -> Result<(Threshold, Vec<QuadTerm>)> {
        let run = self.run as u64;
        let mc_seed = hash64(config.master_seed, run, Stage::Threshold);
        match variant {
            Variant::GaussianReference => {
                let reference = GaussianReference::new(
                    &self.params,
                    config.k,
                    hash64(config.master_seed, run, Stage::GaussianReference),
                )?;
                let th = threshold_gaussian(&self.params, &reference, config.k, kind, config.trials, mc_seed)?;
                let terms = similarity_terms_gaussian(&self.record, &reference, config.k, kind, &th)?;
                Ok((th, terms))
            }
            Variant::ClosestCluster => {
                let (motion, _) = self.closest_motion()?;
                let th = threshold_closest(&self.params, &motion, config.k, kind, config.trials, mc_seed)?;
                let terms = similarity_terms_closest(&self.record, config.k, kind, &th)?;
                Ok((th, terms))
            }
        }
    }

    /// Solves the weighted objective and scores it against the ground truth.
    pub fn solve(
        &self,
        config: &ExperimentConfig,
        radius: &[QuadTerm],
        similarity: &[QuadTerm],
        beta_r: f64,
        beta_s: f64,
    ) -> Result<(MembershipEstimate, f64)> {
        let horizon = self.record.horizon();
        let objective = assemble_objective(radius.to_vec(), similarity.to_vec(), beta_r, beta_s, horizon, config.k)?;
        let estimate = adam_minimize(&objective, &config.solver_for_run(self.run))?;
        let acc = accuracy(&estimate.labels, scored_truth(&self.record.inside, config.k))?;
        Ok((estimate, acc))
    }
}

/// Outcome of a single successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub sim_seed: u64,
    pub accuracy: f64,
    pub inside_fraction: f64,
    pub params: GmmParams,
    /// Absent when the similarity loss is switched off.
    pub threshold: Option<Threshold>,
    pub unconstrained: usize,
    /// Closest-cluster runs whose cluster variance was capped at `var_in`.
    pub motion_capped: bool,
}

/// Full pipeline for one run of `config`; also returns the membership estimate.
pub fn run_single(config: &ExperimentConfig, run: usize) -> Result<(RunOutcome, MembershipEstimate)> {
    let ctx = RunContext::prepare(config, run)?;
    let radius = radius_terms(&ctx.record, config.radius_bound)?;
    let (threshold, similarity) = if config.beta_s > 0.0 {
        let (th, terms) = ctx.similarity(config, config.variant, config.distance)?;
        (Some(th), terms)
    } else {
        (None, Vec::new())
    };
    let (estimate, acc) = ctx.solve(config, &radius, &similarity, config.beta_r, config.beta_s)?;
    let motion_capped = config.beta_s > 0.0 && config.variant == Variant::ClosestCluster && ctx.closest_motion()?.1;
    let outcome = RunOutcome {
        run,
        sim_seed: config.sim_for_run(run).seed,
        accuracy: acc,
        inside_fraction: ground_truth_fraction(&ctx.record),
        params: ctx.params,
        threshold,
        unconstrained: estimate.unconstrained.len(),
        motion_capped,
    };
    Ok((outcome, estimate))
}

/// A run either completes or leaves its error message.
pub type RunResult = std::result::Result<RunOutcome, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Indexed by run.
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn successes(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn per_run_accuracy(&self) -> Vec<f64> {
        self.successes().map(|o| o.accuracy).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.runs.iter().all(|r| r.is_ok())
    }

    /// Mean over completed runs; NaN when none completed.
    pub fn mean_accuracy(&self) -> f64 {
        mean_std(&self.per_run_accuracy()).0
    }

    pub fn stddev_accuracy(&self) -> f64 {
        mean_std(&self.per_run_accuracy()).1
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `f` on `0..count` in parallel with at most `jobs` threads (all cores when `None`),
/// returning results in index order.
pub fn par_map_indexed<T, F>(count: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

/// All runs of one grid cell.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    let runs = par_map_indexed(config.runs, jobs, |run| {
        run_single(config, run).map(|(o, _)| o).map_err(|e| e.to_string())
    })?;
    Ok(ExperimentReport { config: config.clone(), runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: Variant, distance: DistanceKind) -> ExperimentConfig {
        ExperimentConfig {
            sim: SimConfig { horizon: 200, ..reference_scene() },
            variant,
            distance,
            runs: 3,
            trials: 100,
            master_seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn report_is_deterministic_and_job_independent() {
        let cfg = small(Variant::ClosestCluster, DistanceKind::Wasserstein);
        let a = run_experiment(&cfg, Some(1)).unwrap();
        let b = run_experiment(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_complete());
        let mean = a.per_run_accuracy().iter().sum::<f64>() / 3.0;
        assert_eq!(a.mean_accuracy(), mean);
    }

    #[test]
    fn extra_runs_leave_earlier_ones_alone() {
        let cfg = small(Variant::GaussianReference, DistanceKind::Mmd);
        let a = run_experiment(&cfg, None).unwrap();
        let b = run_experiment(&ExperimentConfig { runs: 4, ..cfg }, None).unwrap();
        assert_eq!(a.runs[..], b.runs[..3]);
    }

    #[test]
    fn radius_only_ignores_distance_kind() {
        let base = ExperimentConfig { beta_s: 0.0, ..small(Variant::GaussianReference, DistanceKind::MeanVariance) };
        let a = run_experiment(&base, None).unwrap();
        let b = run_experiment(&ExperimentConfig { distance: DistanceKind::Wasserstein, ..base.clone() }, None).unwrap();
        assert_eq!(a.per_run_accuracy(), b.per_run_accuracy());
    }

    #[test]
    fn failures_become_run_entries() {
        // A horizon of 13 passes validation for k = 6, but EM on 12 increments may still
        // succeed; force failure with a degenerate scene instead.
        let cfg = ExperimentConfig {
            sim: SimConfig { horizon: 13, outside_sigma: 0.0, n_clusters: 0, ..SimConfig::default() },
            beta_s: 0.0,
            runs: 2,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&cfg, None).unwrap();
        assert!(!report.is_complete());
        assert!(report.mean_accuracy().is_nan());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        assert!(ExperimentConfig { runs: 0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { k: 600, ..Default::default() }.validate().is_err());
        let warn = ExperimentConfig { radius_bound: 0.5, ..Default::default() };
        assert_eq!(warn.warnings().len(), 1);
    }
}
