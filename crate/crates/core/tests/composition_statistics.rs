use btp::compose::BtpSampler;
use btp::convergence::{marginal_match_test, sample_values, Variant};
use btp::stats::{ks_two_sample, Estimate, Z_THRESHOLD};
use btp::{Seed, TimeGrid};

#[test]
fn squared_btbm_has_mean_sqrt_two_over_pi() {
    let sampler = BtpSampler::brownian(vec![0.0], TimeGrid::uniform(1.0, 8).unwrap());
    let v: Vec<f64> = (0..100_000u64)
        .map(|i| sampler.btp(Seed::new(20).derive(i)).unwrap().path.terminal()[0].powi(2))
        .collect();
    let z = Estimate::from_samples(&v).unwrap().z_score((2.0 / std::f64::consts::PI).sqrt()).unwrap();
    assert!(z.abs() <= Z_THRESHOLD, "z = {z}");
}

#[test]
fn kebtp_marginals_match_btp() {
    for (j, k) in [1usize, 2, 5].into_iter().enumerate() {
        for (i, t) in [0.5, 1.0].into_iter().enumerate() {
            let ks = marginal_match_test(k, t, 20_000, Seed::new(21).derive2(j as u64, i as u64)).unwrap();
            assert!(ks.p_value > 0.01, "k = {k}, t = {t}: p = {}", ks.p_value);
        }
    }
}

#[test]
fn ebtp_marginal_matches_btp() {
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let a: Vec<f64> = sample_values(Variant::Ebtp, &grid, &[1.0], 20_000, Seed::new(22)).unwrap().into_iter().map(|r| r[0]).collect();
    let b: Vec<f64> = sample_values(Variant::Btp, &grid, &[1.0], 20_000, Seed::new(23)).unwrap().into_iter().map(|r| r[0]).collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

/// Root-mean-square distance from the start of composed values at the nodes
/// flanking inner zero crossings.
fn crossing_rms(steps: usize, n: u64, seed: Seed) -> f64 {
    let sampler = BtpSampler::brownian(vec![0.0], TimeGrid::uniform(1.0, steps).unwrap());
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let c = sampler.ebtp(seed.derive(i)).unwrap();
        let inner = sampler.inner(seed.derive(i)).unwrap();
        let b = inner.raw_values();
        for j in 0..b.len() - 1 {
            if b[j] * b[j + 1] < 0.0 {
                for node in [j, j + 1] {
                    sum += c.path.value(node)[0].powi(2);
                    count += 1;
                }
            }
        }
    }
    (sum / count as f64).sqrt()
}

#[test]
fn composed_paths_are_continuous_at_inner_zeros() {
    // Flanking clock values are O(sqrt(dt)) and each copy restarts at the
    // start point, so the mean square displacement is O(sqrt(dt)) and the
    // RMS shrinks by about sqrt(2) when dt is quartered.
    let coarse = crossing_rms(64, 3_000, Seed::new(24));
    let fine = crossing_rms(256, 3_000, Seed::new(25));
    let ratio = coarse / fine;
    assert!((1.2..=1.7).contains(&ratio), "coarse {coarse}, fine {fine}, ratio {ratio}");
}
