//! Simulates one scene and prints how much time the particle spends inside clusters.
//!
//! ```text
//! cargo run --release --example simulate -- [seed]
//! ```

use particle_clusters::experiment::reference_scene;
use particle_clusters::sim::{ground_truth_fraction, simulate, SimConfig};

fn main() -> particle_clusters::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let config = SimConfig { seed, ..reference_scene() };
    let record = simulate(&config)?;

    let switches = record.inside.windows(2).filter(|w| w[0] != w[1]).count();
    let last = &record.particle[record.horizon() - 1];
    println!("T = {}, N = {}, seed = {seed}", record.horizon(), record.n_clusters());
    println!("inside fraction {:.3}, {switches} entries/exits", ground_truth_fraction(&record));
    println!("final position ({:.2}, {:.2})", last[0], last[1]);
    Ok(())
}
