use std::sync::Arc;

use btp::compose::BtpSampler;
use btp::exit::gaussian_expectation;
use btp::kernels::btp_marginal;
use btp::pde::{bilaplacian_at, dirichlet_solution, solve_exit_moments, Domain};
use btp::quadrature::{GaussHermite, QuadratureSettings};
use btp::stats::{Estimate, Z_THRESHOLD};
use btp::{Builtin, Seed, TestFunction, TimeGrid};

#[test]
fn marginal_quadrature_agrees_with_composed_paths() {
    let settings = QuadratureSettings::default();
    let mut case = 0u64;
    for f in [Builtin::Square, Builtin::Cosine, Builtin::Gauss] {
        for x in [0.0, 0.5] {
            for t in [0.5, 1.0] {
                let quad = btp_marginal(&f, &[x], t, &settings).unwrap();
                let sampler = BtpSampler::brownian(vec![x], TimeGrid::uniform(t, 8).unwrap());
                let seed = Seed::new(30).derive(case);
                let v: Vec<f64> = (0..20_000u64)
                    .map(|i| f.value(sampler.btp(seed.derive(i)).unwrap().path.terminal()))
                    .collect();
                let z = Estimate::from_samples(&v).unwrap().z_score(quad).unwrap();
                assert!(z.abs() <= Z_THRESHOLD, "{} x={x} t={t}: z = {z}", f.name());
                case += 1;
            }
        }
    }
}

#[test]
fn truncation_radius_is_converged() {
    let base = QuadratureSettings::default();
    for f in [Builtin::Square, Builtin::Cosine, Builtin::Gauss] {
        let a = btp_marginal(&f, &[0.3], 0.8, &base).unwrap();
        let b = btp_marginal(&f, &[0.3], 0.8, &base.with_truncation(14.0)).unwrap();
        assert!((a - b).abs() <= base.rel_tol * a.abs().max(1.0), "{}: {a} vs {b}", f.name());
    }
}

#[test]
fn dirichlet_solutions_obey_the_maximum_principle() {
    let data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|y: &[f64]| (3.0 * y[0]).sin() + y[1] * y[1]);
    let disk = Domain::centered_ball(1.0, 2).unwrap();
    let u = dirichlet_solution(&disk, data).unwrap();
    // Boundary range of sin(3 cos a) + sin(a)^2 on a fine sample.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..20_000 {
        let a = i as f64 * std::f64::consts::TAU / 20_000.0;
        let v = u.boundary_value(&[a.cos(), a.sin()]);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    for i in 0..40 {
        let r = 0.95 * ((i * 7 % 40) as f64 / 40.0);
        let a = i as f64 * 0.77;
        let v = u.value(&[r * a.cos(), r * a.sin()]).unwrap();
        assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "u = {v} outside [{lo}, {hi}]");
    }
}

#[test]
fn second_exit_moment_is_biharmonic_with_zero_trace() {
    for domain in [
        Domain::interval(-1.0, 2.0).unwrap(),
        Domain::centered_ball(1.0, 2).unwrap(),
        Domain::ball(vec![0.5, -0.5, 0.0], 2.0).unwrap(),
    ] {
        let m = solve_exit_moments(&domain).unwrap();
        let (c, r) = domain.center_radius();
        let mut x = c.clone();
        x[0] += 0.3 * r;
        let b = bilaplacian_at(|y| m.m2_polynomial(y), &x, 0.05).unwrap();
        assert!((b - 8.0).abs() <= 1e-6, "{domain}: {b}");
        let mut edge = c.clone();
        edge[0] += r;
        assert!(m.m2(&edge).abs() <= 1e-12);
        assert!(m.m1(&edge).abs() <= 1e-12);
    }
}

#[test]
fn solution_equals_data_on_the_boundary() {
    let rule = GaussHermite::new(24).unwrap();
    let domain = Domain::interval(-1.0, 1.0).unwrap();
    let m = solve_exit_moments(&domain).unwrap();
    for x in [-1.0, 1.0] {
        let v = gaussian_expectation(&Builtin::Cube, &[x], m.m2(&[x]), &rule);
        assert_eq!(v, Builtin::Cube.value(&[x]));
    }
}
