//! EM recovery across the five reference scenes, next to the published estimates.
//!
//! ```text
//! cargo run --release --example table1 -- [seed]
//! ```

use particle_clusters::experiment::reproduce_table1;

fn main() -> particle_clusters::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let report = reproduce_table1(seed, None)?;
    print!("{}", report.to_text());
    for (i, row) in report.rows.iter().enumerate() {
        let (name, dev) = row.max_deviation();
        println!("row {}: largest deviation from ground truth {dev:.3} ({name})", i + 1);
    }
    Ok(())
}
