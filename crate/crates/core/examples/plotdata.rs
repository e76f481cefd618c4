//! Writes trajectory plot data (particle, nearest cluster while inside) to stdout.
//!
//! ```text
//! cargo run --release --example plotdata > plot.csv
//! ```

use particle_clusters::experiment::reference_scene;
use particle_clusters::io::{plot_rows, write_plotdata};
use particle_clusters::sim::{simulate, SimConfig};

fn main() -> particle_clusters::Result<()> {
    let config = SimConfig { horizon: 200, seed: 5, ..reference_scene() };
    let record = simulate(&config)?;
    let rows = plot_rows(&record, config.radius);
    let carried = rows.iter().filter(|r| r.cluster.is_some()).count();
    eprintln!("{} rows, {carried} with a carrying cluster", rows.len());
    write_plotdata(&record, config.radius, std::io::stdout().lock())
}
