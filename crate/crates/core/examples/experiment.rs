//! Runs the full pipeline (simulate, fit, terms, solve, score) over several runs.
//!
//! ```text
//! cargo run --release --example experiment -- [runs]
//! ```

use particle_clusters::experiment::{run_experiment, ExperimentConfig};
use particle_clusters::membership::{DistanceKind, Variant};
use particle_clusters::solve::{InitPolicy, SolverConfig};

fn main() -> particle_clusters::Result<()> {
    let runs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let base = ExperimentConfig {
        runs,
        trials: 500,
        solver: SolverConfig { init: InitPolicy::Uniform { seed: 0 }, ..SolverConfig::default() },
        ..ExperimentConfig::default()
    };
    for (beta_r, beta_s) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        for variant in Variant::ALL {
            let config = ExperimentConfig { beta_r, beta_s, variant, distance: DistanceKind::Wasserstein, ..base.clone() };
            let report = run_experiment(&config, None)?;
            println!(
                "beta = ({beta_r}, {beta_s})  {variant:<8} accuracy {:.3} ± {:.3}",
                report.mean_accuracy(),
                report.stddev_accuracy()
            );
        }
    }
    Ok(())
}
