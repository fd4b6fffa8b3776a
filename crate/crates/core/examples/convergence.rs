//! kEBTP against BTP and EBTP: marginals, two-time laws and increment scaling.

use btp::convergence::{holder_scaling, joint_law_distance, joint_law_noise_floor, marginal_match_test};
use btp::Seed;

fn main() -> btp::Result<()> {
    let n = 20_000;
    for k in [2, 5] {
        let ks = marginal_match_test(k, 1.0, n, Seed::new(1))?;
        println!("k = {k}: KS D = {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    }
    for k in [1, 2, 4, 8, 16] {
        let d = joint_law_distance(k, (0.5, 1.0), n, Seed::new(2).derive(k as u64))?;
        println!("joint-law distance to EBTP, k = {k:>2}: {:.4} +/- {:.4}", d.distance, d.stderr);
    }
    let floor = joint_law_noise_floor((0.5, 1.0), n, Seed::new(3))?;
    println!("EBTP against itself: {:.4}", floor.distance);
    let h = holder_scaling(2.0, &[0.2, 0.1, 0.05, 0.025], n, Seed::new(4))?;
    println!("log-log slope of E|dX|^2: {:.3} +/- {:.3}", h.slope, h.slope_stderr);
    Ok(())
}
