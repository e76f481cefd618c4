//! Minimizes a membership objective with ADAM and checks it against the closed form.
//!
//! ```text
//! cargo run --release --example solver
//! ```

use particle_clusters::membership::random_objective;
use particle_clusters::seed::rng_stream;
use particle_clusters::solve::{adam_minimize, closed_form_minimize, SolverConfig};

fn main() -> particle_clusters::Result<()> {
    let mut rng = rng_stream(42, 0);
    let objective = random_objective(&mut rng, 60, 3);
    let config = SolverConfig::default();

    let adam = adam_minimize(&objective, &config)?;
    let exact = closed_form_minimize(&objective, &config.init);
    let gap = adam.e.iter().zip(&exact.e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    println!("objective: start {:.5}, ADAM {:.5}, exact {:.5}", objective.value(&config.init.point(60)), objective.value(&adam.e), objective.value(&exact.e));
    println!("max coordinate gap {gap:.2e}, {} unconstrained coordinates", adam.unconstrained.len());
    let labels: String = adam.labels.iter().map(|&l| if l { 'I' } else { '.' }).collect();
    println!("labels t = {}..={}: {labels}", adam.k + 1, 60 - adam.k);
    Ok(())
}
