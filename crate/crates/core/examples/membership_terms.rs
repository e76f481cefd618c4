//! Builds the radius and similarity terms for one run and shows how confident each loss is.
//!
//! ```text
//! cargo run --release --example membership_terms -- [WS|MMD|MV] [gaussian|closest]
//! ```

use particle_clusters::experiment::{ExperimentConfig, RunContext};
use particle_clusters::membership::{confidence_f, radius_terms, DistanceKind, Variant};

fn main() -> particle_clusters::Result<()> {
    let mut args = std::env::args().skip(1);
    let distance: DistanceKind = args.next().as_deref().unwrap_or("WS").parse()?;
    let variant: Variant = args.next().as_deref().unwrap_or("closest").parse()?;
    let config = ExperimentConfig {
        distance,
        variant,
        trials: 500,
        ..ExperimentConfig::default()
    };

    println!("F(s) for R = {}:", config.radius_bound);
    for s in [1.0, 1.5, 2.0, 2.2, 3.0] {
        println!("  s = {s:.1}  F = {:.4}", confidence_f(s, config.radius_bound));
    }

    let ctx = RunContext::prepare(&config, 0)?;
    let radius = radius_terms(&ctx.record, config.radius_bound)?;
    let (threshold, similarity) = ctx.similarity(&config, variant, distance)?;
    let th = threshold.primary();
    println!("{variant} {distance}: h = {:.4} (E_in {:.4}, E_out {:.4})", th.h, th.e_in, th.e_out);

    let summarize = |name: &str, terms: &[particle_clusters::membership::QuadTerm]| {
        let confident = terms.iter().filter(|q| q.weight > 0.5).count();
        let inside = terms.iter().filter(|q| q.target && q.weight > 0.5).count();
        println!("{name:<10} {:>5} terms, {confident:>5} with weight > 0.5 ({inside} of them say inside)", terms.len());
    };
    summarize("radius", &radius);
    summarize("similarity", &similarity);
    Ok(())
}
