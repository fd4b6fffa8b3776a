use std::sync::Arc;

use btp::paths::{refine_bridge, sample_bm, sample_diffusion, SineConductivity};
use btp::stats::{jarque_bera, ks_two_sample, Estimate, Z_THRESHOLD};
use btp::{GeneratorSpec, Path, Seed, TimeGrid};

const N: usize = 100_000;

fn z(samples: &[f64], theoretical: f64) -> f64 {
    Estimate::from_samples(samples).unwrap().z_score(theoretical).unwrap()
}

#[test]
fn terminal_moments_of_brownian_motion() {
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let ends: Vec<f64> = (0..N as u64)
        .map(|i| sample_bm(&grid, 1, Seed::new(10).derive(i)).unwrap().terminal()[0])
        .collect();
    assert!(z(&ends, 0.0).abs() <= Z_THRESHOLD);
    let squares: Vec<f64> = ends.iter().map(|v| v * v).collect();
    assert!(z(&squares, 1.0).abs() <= Z_THRESHOLD);
}

#[test]
fn bridge_midpoint_moments() {
    let base = Path::scalar(TimeGrid::new(vec![0.0, 1.0]).unwrap(), vec![0.0, 0.8]).unwrap();
    let mids: Vec<f64> = (0..N as u64)
        .map(|i| refine_bridge(&base, &[0.5], Seed::new(11).derive(i)).unwrap().evaluate(0.5).unwrap()[0])
        .collect();
    assert!(z(&mids, 0.4).abs() <= Z_THRESHOLD);
    let dev: Vec<f64> = mids.iter().map(|v| (v - 0.4).powi(2)).collect();
    assert!(z(&dev, 0.25).abs() <= Z_THRESHOLD);
}

#[test]
fn increments_are_gaussian() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let mut incs = Vec::new();
    for i in 0..2_500u64 {
        let p = sample_bm(&grid, 1, Seed::new(12).derive(i)).unwrap();
        let v = p.raw_values();
        incs.extend(v.windows(2).map(|w| (w[1] - w[0]) / 0.5));
    }
    assert_eq!(incs.len(), 10_000);
    assert!(jarque_bera(&incs).unwrap() > 0.01);
}

#[test]
fn refined_value_has_the_fine_grid_law() {
    let coarse = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let fine = TimeGrid::new(vec![0.0, 0.3, 1.0]).unwrap();
    let n = 20_000u64;
    let a: Vec<f64> = (0..n)
        .map(|i| {
            let p = sample_bm(&coarse, 1, Seed::new(13).derive(i)).unwrap();
            refine_bridge(&p, &[0.3], Seed::new(14).derive(i)).unwrap().evaluate(0.3).unwrap()[0]
        })
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|i| sample_bm(&fine, 1, Seed::new(15).derive(i)).unwrap().value(1)[0])
        .collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

#[test]
fn half_laplacian_diffusion_is_brownian() {
    let grid = TimeGrid::uniform(1.0, 20).unwrap();
    let n = 20_000u64;
    let a: Vec<f64> = (0..n)
        .map(|i| sample_diffusion(&GeneratorSpec::HalfLaplacian, &[0.0], &grid, Seed::new(16).derive(i)).unwrap().terminal()[0])
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|i| sample_bm(&grid, 1, Seed::new(17).derive(i)).unwrap().terminal()[0])
        .collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

#[test]
fn euler_step_mean_follows_the_drift() {
    // A f = (g f')' = g f'' + g' f': drift g', diffusion sqrt(2 g).
    let g = SineConductivity { base: 0.5, amplitude: 0.1 };
    let spec = GeneratorSpec::divergence_form(Arc::new(g), 0.5).unwrap();
    let dt = 0.01;
    let grid = TimeGrid::new(vec![0.0, dt]).unwrap();
    let x0 = 0.3;
    let steps: Vec<f64> = (0..N as u64)
        .map(|i| sample_diffusion(&spec, &[x0], &grid, Seed::new(18).derive(i)).unwrap().terminal()[0])
        .collect();
    let expected = x0 + 0.5 * 0.1 * x0.cos() * dt;
    assert!(z(&steps, expected).abs() <= Z_THRESHOLD);
}
