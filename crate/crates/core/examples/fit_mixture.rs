//! Fits the two-mode mixture to ten simulated paths and compares the averages with the scene.
//!
//! ```text
//! cargo run --release --example fit_mixture
//! ```

use particle_clusters::experiment::reference_scene;
use particle_clusters::gmm::{estimate_cluster_motion, fit_increments};
use particle_clusters::sim::{ground_truth_fraction, simulate, SimConfig};

fn main() -> particle_clusters::Result<()> {
    let scene = reference_scene();
    let mut sums = [0.0; 6];
    let runs = 10;
    println!("{:>4} {:>9} {:>9} {:>9} {:>10}", "seed", "sigma_in", "sigma_out", "alpha_in", "inside");
    for seed in 0..runs {
        let record = simulate(&SimConfig { seed, ..scene.clone() })?;
        let fit = fit_increments(&record.increments())?;
        let p = &fit.params;
        let truth = ground_truth_fraction(&record);
        println!("{seed:>4} {:>9.3} {:>9.3} {:>9.3} {truth:>10.3}", p.sigma_in(), p.sigma_out(), p.alpha_in);
        for (s, v) in sums.iter_mut().zip([p.sigma_in(), p.sigma_out(), p.mu_in[0], p.mu_out[0], p.alpha_in, truth]) {
            *s += v / runs as f64;
        }
        if seed == 0 {
            let motion = estimate_cluster_motion(&record.clusters)?;
            println!("     cluster motion: drift ({:.3}, {:.3}), var {:.4}", motion.drift[0], motion.drift[1], motion.var);
        }
    }
    println!("mean: sigma_in {:.3} (scene {:.3}), sigma_out {:.3} ({:.3}), mu_in_x {:.3} ({:.3}), mu_out_x {:.3} ({:.3}), alpha_in {:.3} ({:.3})",
        sums[0], scene.inside_variance().sqrt(), sums[1], scene.outside_sigma, sums[2], scene.cluster_drift[0],
        sums[3], scene.outside_drift[0], sums[4], sums[5]);
    Ok(())
}
