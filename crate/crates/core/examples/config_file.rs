//! Parses an experiment file with override blocks and runs each block briefly.
//!
//! ```text
//! cargo run --release --example config_file
//! ```

use particle_clusters::experiment::{parse_config, run_experiment};

const TEXT: &str = "\
# shared scene
T = 400
N = 400
b = 15
sigma_pc = 0.1
sigma_in = 0.5
runs = 2
trials = 300
init = uniform

[radius-only]
beta_s = 0

[closest-mmd]
variant = closest
distance = MMD
";

fn main() -> particle_clusters::Result<()> {
    for (name, config) in parse_config(TEXT)?.experiments() {
        config.validate()?;
        let report = run_experiment(&config, None)?;
        println!("{name:<12} beta = ({}, {})  accuracy {:.3}", config.beta_r, config.beta_s, report.mean_accuracy());
    }
    Ok(())
}
