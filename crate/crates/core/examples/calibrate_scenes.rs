//! Tunes the arena half-width of every reference scene so its mean inside fraction
//! matches a target, and prints the result next to the built-in value.
//!
//! ```text
//! cargo run --release --example calibrate_scenes -- [runs]
//! ```

use particle_clusters::experiment::{table1_rows, table2_sets};
use particle_clusters::sim::{calibrate_arena, mean_inside_fraction, SimConfig};

fn report(label: &str, sim: &SimConfig, target: f64, runs: usize) -> particle_clusters::Result<()> {
    let arena = calibrate_arena(sim, target, (0.05, 200.0), runs, 2024)?;
    let fresh = mean_inside_fraction(sim, arena, runs, 7)?;
    let builtin = mean_inside_fraction(sim, sim.arena, runs, 7)?;
    println!(
        "{label:<14} T={:<5} target={target:.2}  arena={arena:7.3} (fraction {fresh:.3})  built-in={:7.3} (fraction {builtin:.3})",
        sim.horizon, sim.arena
    );
    Ok(())
}

fn main() -> particle_clusters::Result<()> {
    let runs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    for (i, row) in table1_rows().iter().enumerate() {
        report(&format!("em-row-{}", i + 1), &row.sim, row.published_truth.alpha_in, runs)?;
    }
    for set in table2_sets() {
        report(set.label, &set.sim, 0.55, runs)?;
    }
    Ok(())
}
