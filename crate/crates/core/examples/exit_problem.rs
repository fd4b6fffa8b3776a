//! Iterated exit from an interval and the unit disk.

use std::sync::Arc;

use btp::exit::{sample_iterated_exit, verify_exit_distribution, verify_exit_time, ExitSettings};
use btp::pde::{solve_exit_moments, Domain};
use btp::Seed;

fn main() -> btp::Result<()> {
    let settings = ExitSettings::new(2e-3);
    let interval = Domain::interval(-1.0, 1.0)?;
    let disk = Domain::centered_ball(1.0, 2)?;

    let s = sample_iterated_exit(&[0.0], &interval, &settings, Seed::new(1))?;
    println!("one draw: T = {:.4}, tau^2 = {:.4}, exit at {:?}", s.t, s.tau * s.tau, s.exit_point);

    for domain in [&interval, &disk] {
        let m = solve_exit_moments(domain)?;
        let centre = domain.center_radius().0;
        println!("{domain}: m1 = {:.4}, m2 = {:.4} at the centre", m.m1(&centre), m.m2(&centre));
        let report = verify_exit_time(domain, &[centre], 20_000, &settings, Seed::new(2))?;
        for r in &report.rows {
            println!("  {:<40} {:.4} +/- {:.4} (theory {:.4}, z = {:+.2})", r.quantity, r.estimate.value, r.estimate.stderr, r.theoretical, r.z_score);
        }
    }

    let data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|y: &[f64]| y[0] * y[0] - y[1] * y[1]);
    let report = verify_exit_distribution(&disk, data, &[vec![0.3, 0.0], vec![0.0, 0.6]], 20_000, &settings, Seed::new(3))?;
    for r in &report.rows {
        println!("  {:<40} {:.4} +/- {:.4} (harmonic {:.4})", r.quantity, r.estimate.value, r.estimate.stderr, r.theoretical);
    }
    Ok(())
}
