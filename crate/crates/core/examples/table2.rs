//! The membership accuracy grid: three loss weightings by six similarity measures, for
//! both outside-noise levels.
//!
//! ```text
//! cargo run --release --example table2 -- [runs] [trials]
//! ```

use particle_clusters::experiment::{reproduce_table2, table2_base, table2_sets, ExperimentConfig};

fn main() -> particle_clusters::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse().ok());
    let base = table2_base();
    let base = ExperimentConfig {
        runs: args.next().flatten().unwrap_or(5),
        trials: args.next().flatten().unwrap_or(500),
        ..base
    };
    let report = reproduce_table2(&base, &table2_sets(), None)?;
    print!("{}", report.to_text());
    let worst = report
        .cells
        .iter()
        .map(|c| (c.id(), (c.mean() - c.published).abs()))
        .fold(("".to_string(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    println!("largest gap to the published value: {:.3} at {}", worst.1, worst.0);
    Ok(())
}
