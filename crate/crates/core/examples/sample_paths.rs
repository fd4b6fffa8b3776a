//! Brownian paths, bridge refinement and a divergence-form diffusion.

use std::sync::Arc;

use btp::paths::{refine_bridge, sample_bm, sample_diffusion, SineConductivity};
use btp::stats::mean;
use btp::{GeneratorSpec, Seed, TimeGrid};

fn main() -> btp::Result<()> {
    let grid = TimeGrid::uniform(1.0, 8)?;
    let path = sample_bm(&grid, 1, Seed::new(1))?;
    println!("Brownian path on 8 steps:");
    for (t, v) in path.times().iter().zip(path.raw_values()) {
        println!("  t = {t:.3}  B = {v:+.4}");
    }

    // Insert midpoints; existing nodes are kept.
    let mids: Vec<f64> = (0..8).map(|i| (i as f64 + 0.5) / 8.0).collect();
    let fine = refine_bridge(&path, &mids, Seed::new(2))?;
    println!("refined to {} nodes, B(0.5) unchanged: {}", fine.len(), fine.evaluate(0.5)?[0] == path.evaluate(0.5)?[0]);

    // Terminal second moment over many replicates should be close to 1.
    let ends: Vec<f64> = (0..20_000)
        .map(|i| sample_bm(&grid, 1, Seed::new(3).derive(i)).map(|p| p.terminal()[0].powi(2)))
        .collect::<btp::Result<_>>()?;
    println!("E B(1)^2 ~ {:.4}", mean(&ends));

    let spec = GeneratorSpec::divergence_form(Arc::new(SineConductivity { base: 0.5, amplitude: 0.5 }), 0.25)?;
    let x = sample_diffusion(&spec, &[0.0], &TimeGrid::uniform(1.0, 1000)?, Seed::new(4))?;
    println!("divergence-form diffusion X(1) = {:+.4}", x.terminal()[0]);
    Ok(())
}
