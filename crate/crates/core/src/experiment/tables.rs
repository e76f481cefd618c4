//! The two reference experiments: EM recovery of the mixture parameters, and the
//! membership accuracy grid.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::gmm::{fit_increments, GmmParams};
use crate::membership::{radius_terms, DistanceKind, Variant};
use crate::seed::{hash64, Stage};
use crate::sim::{ground_truth_fraction, simulate, SimConfig};
use crate::solve::InitPolicy;

use super::{mean_std, par_map_indexed, ExperimentConfig, RunContext};

/// Number of clusters in the drifting T=1000 field scenes.
pub const SCENE_CLUSTERS: usize = 4000;
/// Within-cluster wiggle of the reference scenes.
pub const SCENE_WIGGLE: f64 = 0.1;

/// Drifting sigma_out = 0.7 field: 4000 clusters, arena calibrated to an inside fraction
/// near 0.54. Shared by the first rows of both tables; also the default experiment scene.
pub fn reference_scene() -> SimConfig {
    scene(0.5, 0.7, [0.3, 0.3], 1000, SCENE_CLUSTERS, 138.663)
}

/// Same field with sigma_out = 1.0.
pub fn wide_outside_scene() -> SimConfig {
    scene(0.5, 1.0, [0.3, 0.3], 1000, SCENE_CLUSTERS, 131.248)
}

/// Mixture-level parameters as printed in a results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSummary {
    pub sigma_in: f64,
    pub sigma_out: f64,
    pub mu_in: [f64; 2],
    pub mu_out: [f64; 2],
    pub alpha_in: f64,
    pub alpha_out: f64,
}

impl MixtureSummary {
    fn from_params(p: &GmmParams) -> Self {
        Self {
            sigma_in: p.sigma_in(),
            sigma_out: p.sigma_out(),
            mu_in: [p.mu_in[0], p.mu_in[1]],
            mu_out: [p.mu_out[0], p.mu_out[1]],
            alpha_in: p.alpha_in,
            alpha_out: p.alpha_out,
        }
    }

    /// Named scalar components in table order.
    pub fn components(&self) -> [(&'static str, f64); 8] {
        [
            ("sigma_in", self.sigma_in),
            ("sigma_out", self.sigma_out),
            ("mu_in_x", self.mu_in[0]),
            ("mu_in_y", self.mu_in[1]),
            ("mu_out_x", self.mu_out[0]),
            ("mu_out_y", self.mu_out[1]),
            ("alpha_in", self.alpha_in),
            ("alpha_out", self.alpha_out),
        ]
    }

    fn mean_of(items: &[MixtureSummary]) -> Self {
        let avg = |f: &dyn Fn(&MixtureSummary) -> f64| items.iter().map(f).sum::<f64>() / items.len() as f64;
        Self {
            sigma_in: avg(&|s| s.sigma_in),
            sigma_out: avg(&|s| s.sigma_out),
            mu_in: [avg(&|s| s.mu_in[0]), avg(&|s| s.mu_in[1])],
            mu_out: [avg(&|s| s.mu_out[0]), avg(&|s| s.mu_out[1])],
            alpha_in: avg(&|s| s.alpha_in),
            alpha_out: avg(&|s| s.alpha_out),
        }
    }
}

fn scene(sigma_in: f64, sigma_out: f64, mu_in: [f64; 2], horizon: usize, n_clusters: usize, arena: f64) -> SimConfig {
    SimConfig {
        horizon,
        n_clusters,
        arena,
        ..SimConfig::from_mixture(sigma_in, sigma_out, &mu_in, &[0.0, 0.0])
    }
    .with_inside_split(sigma_in, SCENE_WIGGLE)
}

/// A row of the EM recovery table: the generating scene and the published values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub sim: SimConfig,
    pub runs: usize,
    pub published_truth: MixtureSummary,
    pub published_estimate: MixtureSummary,
}

fn summary(sigma_in: f64, sigma_out: f64, mu_in: [f64; 2], mu_out: [f64; 2], alpha_in: f64, alpha_out: f64) -> MixtureSummary {
    MixtureSummary { sigma_in, sigma_out, mu_in, mu_out, alpha_in, alpha_out }
}

/// The five scenes, with arenas calibrated to the published inside fractions.
///
/// The drifting T=1000 scenes use a wide, dense field so the particle keeps meeting new
/// clusters after falling off one; that keeps each run's inside fraction near the target.
/// A field wide enough for the drifting T=5000 scene would need ~10^5 clusters, so that
/// row starts every cluster near the origin and its inside fraction stays low.
pub fn table1_rows() -> Vec<Table1Row> {
    let drift = [0.3, 0.3];
    let still = [0.0, 0.0];
    let row = |sim: SimConfig, truth: MixtureSummary, est: MixtureSummary| Table1Row {
        sim,
        runs: 10,
        published_truth: truth,
        published_estimate: est,
    };
    vec![
        row(
            reference_scene(),
            summary(0.5, 0.7, drift, still, 0.54, 0.46),
            summary(0.48, 0.71, [0.32, 0.29], [-0.01, -0.01], 0.54, 0.46),
        ),
        row(
            wide_outside_scene(),
            summary(0.5, 1.0, drift, still, 0.58, 0.42),
            summary(0.50, 1.00, [0.31, 0.30], [-0.02, -0.04], 0.58, 0.42),
        ),
        row(
            scene(0.5, 0.7, still, 1000, 400, 44.768),
            summary(0.5, 0.7, still, still, 0.56, 0.44),
            summary(0.45, 0.69, [-0.02, -0.04], [0.24, -0.09], 0.55, 0.45),
        ),
        row(
            scene(0.5, 0.7, drift, 5000, 400, 0.05),
            summary(0.5, 0.7, drift, still, 0.55, 0.45),
            summary(0.49, 0.69, [0.31, 0.30], [0.02, 0.01], 0.52, 0.48),
        ),
        row(
            scene(0.5, 0.7, still, 5000, 1000, 60.431),
            // The published weights 0.57 / 0.34 do not sum to one.
            summary(0.5, 0.7, still, still, 0.57, 0.34),
            summary(0.51, 0.73, [0.00, 0.00], [-0.01, 0.01], 0.61, 0.39),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1RowReport {
    pub row: Table1Row,
    pub per_run: Vec<MixtureSummary>,
    /// Realized inside fraction of each run.
    pub per_run_inside: Vec<f64>,
    pub mean: MixtureSummary,
    /// The generating parameters with the realized mean inside fraction as weights.
    pub truth: MixtureSummary,
}

impl Table1RowReport {
    /// Largest absolute deviation of the mean estimate from the generating parameters.
    pub fn max_deviation(&self) -> (&'static str, f64) {
        self.mean
            .components()
            .iter()
            .zip(self.truth.components())
            .map(|(&(name, a), (_, b))| (name, (a - b).abs()))
            .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Report {
    pub rows: Vec<Table1RowReport>,
}

fn row_master(master: u64, index: usize) -> u64 {
    hash64(master, index as u64, Stage::Simulation)
}

/// Fits the mixture on every run of every row. Run seeds derive from `master_seed` and
/// the row index.
pub fn reproduce_table1(master_seed: u64, jobs: Option<usize>) -> Result<Table1Report> {
    let rows = table1_rows();
    let tasks: Vec<(usize, usize)> =
        rows.iter().enumerate().flat_map(|(i, r)| (0..r.runs).map(move |run| (i, run))).collect();
    let fits = par_map_indexed(tasks.len(), jobs, |task| -> Result<(MixtureSummary, f64)> {
        let (i, run) = tasks[task];
        let sim = SimConfig { seed: hash64(row_master(master_seed, i), run as u64, Stage::Simulation), ..rows[i].sim.clone() };
        let record = simulate(&sim)?;
        let fit = fit_increments(&record.increments())?;
        Ok((MixtureSummary::from_params(&fit.params), ground_truth_fraction(&record)))
    })?;
    let mut fits = fits.into_iter();
    let mut reports = Vec::new();
    for row in rows {
        let mut per_run = Vec::new();
        let mut per_run_inside = Vec::new();
        for _ in 0..row.runs {
            let (s, inside) = fits.next().expect("one fit per task")?;
            per_run.push(s);
            per_run_inside.push(inside);
        }
        let mean = MixtureSummary::mean_of(&per_run);
        let alpha = per_run_inside.iter().sum::<f64>() / per_run_inside.len() as f64;
        let sim = &row.sim;
        let truth = summary(
            sim.inside_variance().sqrt(),
            sim.outside_sigma,
            [sim.cluster_drift[0], sim.cluster_drift[1]],
            [sim.outside_drift[0], sim.outside_drift[1]],
            alpha,
            1.0 - alpha,
        );
        reports.push(Table1RowReport { row, per_run, per_run_inside, mean, truth });
    }
    Ok(Table1Report { rows: reports })
}

impl Table1Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<5} {:>5} {:<10} {:>8} {:>8} {:>16} {:>16} {:>7} {:>7}",
            "row", "T", "kind", "sig_in", "sig_out", "mu_in", "mu_out", "a_in", "a_out"
        );
        for (i, r) in self.rows.iter().enumerate() {
            for (kind, m) in [
                ("truth", &r.truth),
                ("estimate", &r.mean),
                ("pub.truth", &r.row.published_truth),
                ("pub.est", &r.row.published_estimate),
            ] {
                let _ = writeln!(
                    s,
                    "{:<5} {:>5} {:<10} {:>8.3} {:>8.3} {:>16} {:>16} {:>7.3} {:>7.3}",
                    i + 1,
                    r.row.sim.horizon,
                    kind,
                    m.sigma_in,
                    m.sigma_out,
                    format!("({:.3},{:.3})", m.mu_in[0], m.mu_in[1]),
                    format!("({:.3},{:.3})", m.mu_out[0], m.mu_out[1]),
                    m.alpha_in,
                    m.alpha_out
                );
            }
        }
        s
    }

    /// `row,horizon,kind,sigma_in,...,alpha_out`, one line per row and kind.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,horizon,kind,sigma_in,sigma_out,mu_in_x,mu_in_y,mu_out_x,mu_out_y,alpha_in,alpha_out")?;
        for (i, r) in self.rows.iter().enumerate() {
            for (kind, m) in [
                ("truth", &r.truth),
                ("estimate", &r.mean),
                ("published_truth", &r.row.published_truth),
                ("published_estimate", &r.row.published_estimate),
            ] {
                let vals: Vec<String> = m.components().iter().map(|(_, v)| crate::io::fmt_f64(*v)).collect();
                writeln!(out, "{},{},{},{}", i + 1, r.row.sim.horizon, kind, vals.join(","))?;
            }
        }
        Ok(())
    }
}

/// Defaults of the accuracy grid: 20 runs, and a uniform random start for the solver
/// so that coordinates no term constrains are labelled by a fair coin.
pub fn table2_base() -> ExperimentConfig {
    let mut base = ExperimentConfig::default();
    base.solver.init = InitPolicy::Uniform { seed: 0 };
    base
}

/// Loss weightings of the accuracy grid, in table order.
pub const TABLE2_BETAS: [(f64, f64); 3] = [(0.0, 1.0), (1.0, 1.0), (1.0, 0.0)];

/// One parameter set of the accuracy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2Set {
    pub label: &'static str,
    pub sim: SimConfig,
    /// `published[beta_row][column]`, columns ordered as [`table2_columns`].
    pub published: [[f64; 6]; 3],
}

/// Column order: gaussian MV, WS, MMD, then closest MV, WS, MMD.
pub fn table2_columns() -> Vec<(Variant, DistanceKind)> {
    Variant::ALL.iter().flat_map(|&v| DistanceKind::ALL.iter().map(move |&d| (v, d))).collect()
}

pub fn table2_sets() -> Vec<Table2Set> {
    vec![
        Table2Set {
            label: "out0.7",
            sim: reference_scene(),
            published: [
                [0.77, 0.77, 0.74, 0.73, 0.90, 0.90],
                [0.84, 0.89, 0.87, 0.81, 0.90, 0.94],
                [0.70, 0.70, 0.68, 0.70, 0.70, 0.69],
            ],
        },
        Table2Set {
            label: "out1.0",
            sim: wide_outside_scene(),
            published: [
                [0.83, 0.86, 0.79, 0.72, 0.90, 0.92],
                [0.87, 0.92, 0.90, 0.82, 0.91, 0.93],
                [0.68, 0.67, 0.68, 0.68, 0.69, 0.70],
            ],
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Cell {
    pub set: &'static str,
    pub beta_r: f64,
    pub beta_s: f64,
    pub distance: DistanceKind,
    pub variant: Variant,
    /// Indexed by run; failed runs keep their error message.
    pub per_run: Vec<std::result::Result<f64, String>>,
    pub published: f64,
}

impl Table2Cell {
    pub fn id(&self) -> String {
        format!("{}_{}_{}_b{}-{}", self.set, self.variant, self.distance, self.beta_r, self.beta_s)
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.per_run.iter().filter_map(|r| r.as_ref().ok().copied()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.per_run.iter().all(|r| r.is_ok())
    }

    pub fn mean(&self) -> f64 {
        mean_std(&self.accuracies()).0
    }

    pub fn stddev(&self) -> f64 {
        mean_std(&self.accuracies()).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Report {
    pub cells: Vec<Table2Cell>,
}

impl Table2Report {
    pub fn cell(&self, set: &str, beta: (f64, f64), variant: Variant, distance: DistanceKind) -> Option<&Table2Cell> {
        self.cells.iter().find(|c| {
            c.set == set && (c.beta_r, c.beta_s) == beta && c.variant == variant && c.distance == distance
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>4} {:>4} {:<9} {:<4} {:>8} {:>7} {:>9}",
            "set", "b_r", "b_s", "variant", "dist", "accuracy", "stddev", "published"
        );
        for c in &self.cells {
            let flag = if c.is_complete() { "" } else { " (incomplete)" };
            let _ = writeln!(
                s,
                "{:<8} {:>4} {:>4} {:<9} {:<4} {:>8.3} {:>7.3} {:>9.2}{}",
                c.set, c.beta_r, c.beta_s, c.variant, c.distance, c.mean(), c.stddev(), c.published, flag
            );
        }
        s
    }

    /// `cell_id,beta_r,beta_s,distance,variant,mean_accuracy,stddev`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "cell_id,beta_r,beta_s,distance,variant,mean_accuracy,stddev")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.id(),
                c.beta_r,
                c.beta_s,
                c.distance,
                c.variant,
                crate::io::fmt_f64(c.mean()),
                crate::io::fmt_f64(c.stddev())
            )?;
        }
        Ok(())
    }
}

/// The experiment configuration of every cell in `set`; `base` supplies everything the
/// set does not fix (window, `R`, runs, trials, solver, seed).
pub fn table2_set_config(base: &ExperimentConfig, set_index: usize, set: &Table2Set) -> ExperimentConfig {
    ExperimentConfig {
        sim: set.sim.clone(),
        master_seed: hash64(base.master_seed, set_index as u64, Stage::Threshold),
        ..base.clone()
    }
}

/// Runs the whole grid. Each run simulates and fits once and shares that across all
/// cells; each (variant, distance) pair builds its similarity terms once for all
/// weightings. A cell therefore reports exactly what
/// [`run_experiment`](super::run_experiment) gives for its configuration.
pub fn reproduce_table2(base: &ExperimentConfig, sets: &[Table2Set], jobs: Option<usize>) -> Result<Table2Report> {
    base.validate()?;
    let columns = table2_columns();
    let configs: Vec<ExperimentConfig> =
        sets.iter().enumerate().map(|(i, s)| table2_set_config(base, i, s)).collect();
    for c in &configs {
        c.validate()?;
    }
    let tasks: Vec<(usize, usize)> =
        (0..sets.len()).flat_map(|s| (0..base.runs).map(move |run| (s, run))).collect();

    // results[task][beta][column]
    let results = par_map_indexed(tasks.len(), jobs, |task| {
        let (s, run) = tasks[task];
        let cfg = &configs[s];
        let fail = |e: String| vec![vec![Err(e); columns.len()]; TABLE2_BETAS.len()];
        let ctx = match RunContext::prepare(cfg, run) {
            Ok(c) => c,
            Err(e) => return fail(e.to_string()),
        };
        let radius = match radius_terms(&ctx.record, cfg.radius_bound) {
            Ok(r) => r,
            Err(e) => return fail(e.to_string()),
        };
        let mut out = vec![Vec::with_capacity(columns.len()); TABLE2_BETAS.len()];
        for &(variant, kind) in &columns {
            let similarity = ctx.similarity(cfg, variant, kind).map(|(_, terms)| terms);
            for (b, &(beta_r, beta_s)) in TABLE2_BETAS.iter().enumerate() {
                let acc = if beta_s > 0.0 {
                    similarity.as_ref().map_err(|e| e.to_string()).and_then(|sim| {
                        ctx.solve(cfg, &radius, sim, beta_r, beta_s).map(|(_, a)| a).map_err(|e| e.to_string())
                    })
                } else {
                    ctx.solve(cfg, &radius, &[], beta_r, beta_s).map(|(_, a)| a).map_err(|e| e.to_string())
                };
                out[b].push(acc);
            }
        }
        out
    })?;

    let mut cells = Vec::new();
    for (s, set) in sets.iter().enumerate() {
        for (b, &(beta_r, beta_s)) in TABLE2_BETAS.iter().enumerate() {
            for (c, &(variant, distance)) in columns.iter().enumerate() {
                let per_run = tasks
                    .iter()
                    .zip(&results)
                    .filter(|((ts, _), _)| *ts == s)
                    .map(|(_, r)| r[b][c].clone())
                    .collect();
                cells.push(Table2Cell {
                    set: set.label,
                    beta_r,
                    beta_s,
                    distance,
                    variant,
                    per_run,
                    published: set.published[b][c],
                });
            }
        }
    }
    Ok(Table2Report { cells })
}
