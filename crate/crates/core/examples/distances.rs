//! Distances between displacement windows: exact W2, the Riesz-kernel MMD, and the
//! mean/variance pair.
//!
//! ```text
//! cargo run --release --example distances
//! ```

use particle_clusters::measures::{gaussian_sample_measure, mmd_riesz, mv_distances, wasserstein2, EmpiricalMeasure};
use particle_clusters::Point;

fn main() -> particle_clusters::Result<()> {
    let inside = gaussian_sample_measure(&Point::from_vec(vec![0.3, 0.3]), 0.25, 12, 1)?;
    let inside2 = gaussian_sample_measure(&Point::from_vec(vec![0.3, 0.3]), 0.25, 12, 2)?;
    let outside = gaussian_sample_measure(&Point::zeros(2), 0.49, 12, 3)?;

    println!("{:<20} {:>8} {:>8} {:>8} {:>8}", "pair", "W2", "MMD", "d_mean", "d_var");
    for (name, a, b) in [("inside / inside", &inside, &inside2), ("inside / outside", &inside, &outside)] {
        let (dm, dv) = mv_distances(a, b)?;
        println!("{name:<20} {:>8.4} {:>8.4} {dm:>8.4} {dv:>8.4}", wasserstein2(a, b)?, mmd_riesz(a, b)?);
    }

    // Unequal weights go through the transportation simplex.
    let mu = EmpiricalMeasure::new(vec![Point::from_vec(vec![0.0, 0.0]), Point::from_vec(vec![1.0, 0.0])], vec![0.25, 0.75])?;
    let nu = EmpiricalMeasure::uniform(vec![Point::from_vec(vec![0.0, 1.0])])?;
    println!("weighted W2 = {:.4} (expected {:.4})", wasserstein2(&mu, &nu)?, (0.25f64 + 0.75 * 2.0).sqrt());
    Ok(())
}
