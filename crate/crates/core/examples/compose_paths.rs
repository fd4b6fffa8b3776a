//! Brownian-time Brownian motion and its excursion-based variants on one
//! inner clock.

use btp::compose::{excursions, BtpSampler};
use btp::{Seed, TimeGrid};

fn main() -> btp::Result<()> {
    let sampler = BtpSampler::brownian(vec![0.0], TimeGrid::uniform(1.0, 400)?);
    let seed = Seed::new(11);

    let inner = sampler.inner(seed)?;
    let decomposition = excursions(&inner)?;
    println!("inner clock: {} excursions, max |B| = {:.4}", decomposition.len(), inner.raw_values().iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let btp = sampler.btp(seed)?;
    let k3 = sampler.kebtp(3, seed)?;
    let fresh = sampler.ebtp(seed)?;
    for (name, c) in [("BTP", &btp), ("3EBTP", &k3), ("EBTP", &fresh)] {
        println!("{name:>6}: X(1) = {:+.4}", c.path.terminal()[0]);
    }

    let used: std::collections::BTreeSet<usize> = k3.decomposition.intervals.iter().map(|e| e.label).collect();
    println!("3EBTP copies used: {used:?}");
    Ok(())
}
