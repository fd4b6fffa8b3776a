//! Iterated exit problem for Brownian-time Brownian motion.
//!
//! The process leaves `G` at `T = inf{t : |B(t)| = τ}` where `τ` is the exit
//! time of the outer Brownian motion from `G`; its position at that moment is
//! the outer exit point. Paths are simulated on a fixed step with a
//! Brownian-bridge crossing test between nodes and bisection refinement of
//! the step containing the first crossing.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pde::{bilaplacian_at, dirichlet_solution, solve_exit_moments, Domain};
use crate::quadrature::GaussHermite;
use crate::report::{ReportRow, VerificationReport};
use crate::rng::{Seed, SimRng};
use crate::stats::Estimate;
use crate::testfn::TestFunction;

/// One draw of the iterated exit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    /// Iterated exit time.
    pub t: f64,
    pub exit_point: Vec<f64>,
    /// Exit time of the outer path.
    pub tau: f64,
}

/// Discretisation controls for exit sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSettings {
    /// Time step of the outer walk; the inner walk uses `step * tau²`.
    pub step: f64,
    /// Bisection levels used to localise a crossing inside one step.
    pub refine_levels: u32,
    /// Steps allowed per walk before giving up.
    pub max_steps: u64,
}

impl ExitSettings {
    pub fn new(step: f64) -> Self {
        ExitSettings {
            step,
            refine_levels: 8,
            max_steps: 50_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("exit step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// Probability that a Brownian bridge of duration `h` between two interior
/// points touches the boundary. Exact for a half-line; each face of an
/// interval is treated independently and a sphere by its tangent plane.
fn crossing_probability(domain: &Domain, v0: &[f64], v1: &[f64], h: f64) -> f64 {
    let one = |d0: f64, d1: f64| {
        let e = 2.0 * d0 * d1 / h;
        if e > 40.0 {
            0.0
        } else {
            (-e).exp()
        }
    };
    match domain {
        Domain::Interval { a, b } => {
            let pa = one(v0[0] - a, v1[0] - a);
            let pb = one(b - v0[0], b - v1[0]);
            1.0 - (1.0 - pa) * (1.0 - pb)
        }
        Domain::Ball { .. } => one(domain.boundary_distance(v0), domain.boundary_distance(v1)),
    }
}

fn gaussian_step(rng: &mut SimRng, from: &[f64], sd: f64, out: &mut [f64]) {
    for (o, f) in out.iter_mut().zip(from) {
        let z: f64 = rng.sample(StandardNormal);
        *o = f + sd * z;
    }
}

/// Narrow a step `[t0, t1]` known to contain the first crossing, by
/// sampling bridge midpoints conditioned on a crossing (rejection) and
/// choosing the half holding the first crossing.
fn locate_crossing(
    domain: &Domain,
    mut t0: f64,
    v0: &[f64],
    mut t1: f64,
    v1: &[f64],
    levels: u32,
    rng: &mut SimRng,
) -> (f64, Vec<f64>) {
    let mut a = v0.to_vec();
    let mut b = v1.to_vec();
    let mut mid = vec![0.0; a.len()];
    for _ in 0..levels {
        let half = 0.5 * (t1 - t0);
        let b_out = domain.boundary_distance(&b) <= 0.0;
        let mut go_left = None;
        for _ in 0..10_000 {
            let centre: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            gaussian_step(rng, &centre, (0.5 * half).sqrt(), &mut mid);
            if domain.boundary_distance(&mid) <= 0.0 {
                go_left = Some(true);
                break;
            }
            let pl = crossing_probability(domain, &a, &mid, half);
            let pr = if b_out {
                1.0
            } else {
                crossing_probability(domain, &mid, &b, half)
            };
            let pc = 1.0 - (1.0 - pl) * (1.0 - pr);
            if rng.random::<f64>() < pc {
                go_left = Some(rng.random::<f64>() * pc < pl);
                break;
            }
        }
        match go_left {
            Some(true) => {
                t1 = t0 + half;
                b.copy_from_slice(&mid);
            }
            Some(false) => {
                t0 += half;
                a.copy_from_slice(&mid);
            }
            // Crossing too unlikely to condition on; keep the current step.
            None => break,
        }
    }
    let point = if domain.boundary_distance(&b) < domain.boundary_distance(&a) {
        domain.project_to_boundary(&b)
    } else {
        domain.project_to_boundary(&a)
    };
    (0.5 * (t0 + t1), point)
}

/// First exit of Brownian motion started at `x` from `domain`.
fn brownian_exit(domain: &Domain, x: &[f64], settings: &ExitSettings, rng: &mut SimRng) -> Result<(f64, Vec<f64>)> {
    let h = settings.step;
    let sd = h.sqrt();
    let mut pos = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for k in 0..settings.max_steps {
        gaussian_step(rng, &pos, sd, &mut next);
        let t0 = k as f64 * h;
        let crossed = domain.boundary_distance(&next) <= 0.0
            || rng.random::<f64>() < crossing_probability(domain, &pos, &next, h);
        if crossed {
            return Ok(locate_crossing(domain, t0, &pos, t0 + h, &next, settings.refine_levels, rng));
        }
        std::mem::swap(&mut pos, &mut next);
    }
    Err(Error::BudgetExceeded {
        steps: settings.max_steps,
    })
}

fn check_start(domain: &Domain, x: &[f64]) -> Result<bool> {
    if x.len() != domain.dim() {
        return Err(Error::invalid(format!(
            "start point has dimension {}, domain has {}",
            x.len(),
            domain.dim()
        )));
    }
    let d = domain.boundary_distance(x);
    if d < -1e-12 {
        return Err(Error::invalid(format!("start point {x:?} lies outside the domain")));
    }
    Ok(d <= 1e-12)
}

/// Outer exit only: `(tau, exit_point)`. The iterated process leaves the
/// domain at the same point.
pub fn sample_outer_exit(x: &[f64], domain: &Domain, settings: &ExitSettings, seed: Seed) -> Result<(f64, Vec<f64>)> {
    settings.validate()?;
    if check_start(domain, x)? {
        return Ok((0.0, x.to_vec()));
    }
    brownian_exit(domain, x, settings, &mut seed.rng())
}

/// Draw `(T, exit_point, tau)`: the outer walk to its exit, then the inner
/// walk to its exit from `(-tau, tau)`.
///
/// The inner exit is simulated for `B / tau` on `(-1, 1)` with the outer
/// step and rescaled by `tau²`, which is the same law as walking `B` on
/// `(-tau, tau)` with step `step * tau²`.
pub fn sample_iterated_exit(x: &[f64], domain: &Domain, settings: &ExitSettings, seed: Seed) -> Result<ExitSample> {
    settings.validate()?;
    if check_start(domain, x)? {
        return Ok(ExitSample {
            t: 0.0,
            exit_point: x.to_vec(),
            tau: 0.0,
        });
    }
    let mut rng = seed.rng();
    let (tau, exit_point) = brownian_exit(domain, x, settings, &mut rng)?;
    let unit = Domain::Interval { a: -1.0, b: 1.0 };
    let (s, _) = brownian_exit(&unit, &[0.0], settings, &mut rng)?;
    Ok(ExitSample {
        t: s * tau * tau,
        exit_point,
        tau,
    })
}

fn format_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    parts.join("/")
}

/// Monte Carlo `E f(exit point)` against the harmonic extension of `f` at
/// each start point.
pub fn verify_exit_distribution(
    domain: &Domain,
    data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    xs: &[Vec<f64>],
    n: usize,
    settings: &ExitSettings,
    seed: Seed,
) -> Result<VerificationReport> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2 replicates"));
    }
    let solution = dirichlet_solution(domain, data.clone())?;
    let mut report = VerificationReport::new("exit_distribution");
    report.meta("domain", domain);
    report.meta("n", n);
    report.meta("step", settings.step);
    for (k, x) in xs.iter().enumerate() {
        let point_seed = seed.derive(k as u64);
        let values = (0..n)
            .into_par_iter()
            .map(|i| sample_outer_exit(x, domain, settings, point_seed.derive(i as u64)).map(|(_, p)| data(&p)))
            .collect::<Result<Vec<f64>>>()?;
        let est = Estimate::from_samples(&values)?;
        let theo = solution.value(x)?;
        report.push(ReportRow::statistical(
            format!("exit_value[x={}]", format_point(x)),
            theo,
            est,
        )?);
    }
    Ok(report)
}

/// Monte Carlo `E T` and `E tau²` against `m2(x)`, plus the paired
/// difference `T - tau²` against 0.
pub fn verify_exit_time(
    domain: &Domain,
    xs: &[Vec<f64>],
    n: usize,
    settings: &ExitSettings,
    seed: Seed,
) -> Result<VerificationReport> {
    if n < 2 {
        return Err(Error::invalid("need n >= 2 replicates"));
    }
    let moments = solve_exit_moments(domain)?;
    let mut report = VerificationReport::new("exit_time");
    report.meta("domain", domain);
    report.meta("n", n);
    report.meta("step", settings.step);
    for (k, x) in xs.iter().enumerate() {
        let point_seed = seed.derive(k as u64);
        let samples = (0..n)
            .into_par_iter()
            .map(|i| sample_iterated_exit(x, domain, settings, point_seed.derive(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let tau2: Vec<f64> = samples.iter().map(|s| s.tau * s.tau).collect();
        let diff: Vec<f64> = ts.iter().zip(&tau2).map(|(a, b)| a - b).collect();
        let m2 = moments.m2(x);
        let tag = format_point(x);
        let exact_or_sampled = |v: &[f64]| -> Result<Estimate> {
            if v.iter().all(|s| *s == 0.0) {
                Ok(Estimate { value: 0.0, stderr: 0.0, n: v.len() })
            } else {
                Estimate::from_samples(v)
            }
        };
        report.push(ReportRow::statistical(format!("mean_exit_time[x={tag}]"), m2, exact_or_sampled(&ts)?)?);
        report.push(ReportRow::statistical(format!("mean_outer_exit_time_sq[x={tag}]"), m2, exact_or_sampled(&tau2)?)?);
        report.push(ReportRow::statistical(format!("paired_exit_time_minus_tau_sq[x={tag}]"), 0.0, exact_or_sampled(&diff)?)?);
    }
    Ok(report)
}

/// Gauss-Hermite nodes per coordinate for deterministic-time expectations.
const HERMITE_NODES: usize = 24;

/// `E f(x + sqrt(t) Z)` by tensor Gauss-Hermite quadrature.
pub fn gaussian_expectation(f: &dyn TestFunction, x: &[f64], t: f64, rule: &GaussHermite) -> f64 {
    if t == 0.0 {
        return f.value(x);
    }
    let sd = t.sqrt();
    let mut y = x.to_vec();
    rule.expect_nd(x.len(), |z| {
        for ((yi, xi), zi) in y.iter_mut().zip(x).zip(z) {
            *yi = xi + sd * zi;
        }
        f.value(&y)
    })
}

fn check_biharmonic(f: &dyn TestFunction, x: &[f64]) -> Result<()> {
    let h = 0.05;
    let mut probes = vec![x.to_vec()];
    for i in 0..x.len() {
        for s in [-0.5, 0.5] {
            let mut p = x.to_vec();
            p[i] += s;
            probes.push(p);
        }
    }
    for p in &probes {
        let b = bilaplacian_at(|y| f.value(y), p, h)?;
        if b.abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "{} is not biharmonic: discrete bi-Laplacian {b:e} at {p:?}",
                f.name()
            )));
        }
    }
    Ok(())
}

/// For biharmonic `f`, compare `E f(x + sqrt(t) Z)` with the two-term
/// expansion `f(x) + t Δf(x) / 2` (tolerance `tol`).
pub fn ito_truncation_check(f: &dyn TestFunction, t: f64, x: &[f64], tol: f64) -> Result<VerificationReport> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    check_biharmonic(f, x)?;
    let rule = GaussHermite::new(HERMITE_NODES)?;
    let lhs = gaussian_expectation(f, x, t, &rule);
    let rhs = f.value(x) + 0.5 * t * f.laplacian(x);
    let mut report = VerificationReport::new("ito_truncation");
    report.meta("f", f.name());
    report.meta("t", t);
    report.push(ReportRow::absolute(
        format!("expected_value_vs_expansion[f={};x={}]", f.name(), format_point(x)),
        rhs,
        lhs,
        tol,
    ));
    Ok(report)
}

/// The three right-hand sides compared against the discrete `Δ²u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthOrderCandidates {
    /// Finite-difference `Δ²u` of the quadrature-built `u`.
    pub bilaplacian_u: f64,
    /// `4Δf + ∇Δf·∇Δm2 + 2 Σ_{i≠j} D_ijΔf D_ij m2`.
    pub printed: f64,
    /// `4Δf + 2∇Δf·∇Δm2 + 2 Σ_{i,j} D_ijΔf D_ij m2`.
    pub derived: f64,
    /// `4Δf`, valid when `∇Δf = 0`.
    pub reduced: f64,
    /// `|∇Δf(x)|`.
    pub grad_laplacian_norm: f64,
}

/// Evaluate `Δ²u` of `u(x) = E f(x + sqrt(m2(x)) Z)` at `x` by the
/// pointwise difference stencil of step `h`, together with the candidate
/// right-hand sides.
pub fn fourth_order_candidates(
    domain: &Domain,
    f: &dyn TestFunction,
    x: &[f64],
    h: f64,
) -> Result<FourthOrderCandidates> {
    let moments = solve_exit_moments(domain)?;
    if x.len() != domain.dim() {
        return Err(Error::invalid("point dimension does not match domain"));
    }
    if domain.boundary_distance(x) < 2.0 * h * (x.len() as f64).sqrt() {
        return Err(Error::invalid(format!(
            "stencil of step {h} around {x:?} leaves the domain"
        )));
    }
    let rule = GaussHermite::new(HERMITE_NODES)?;
    let u = |y: &[f64]| gaussian_expectation(f, y, moments.m2(y), &rule);
    let bilaplacian_u = bilaplacian_at(u, x, h)?;

    let d = x.len();
    let lap = f.laplacian(x);
    let g = f.grad_laplacian(x);
    let hl = f.hessian_laplacian(x);
    let gm = moments.m2_grad_laplacian(x);
    let hm = moments.m2_hessian(x);
    let dot: f64 = g.iter().zip(&gm).map(|(a, b)| a * b).sum();
    let mut off = 0.0;
    let mut full = 0.0;
    for i in 0..d {
        for j in 0..d {
            let p = hl[i * d + j] * hm[i * d + j];
            full += p;
            if i != j {
                off += p;
            }
        }
    }
    Ok(FourthOrderCandidates {
        bilaplacian_u,
        printed: 4.0 * lap + dot + 2.0 * off,
        derived: 4.0 * lap + 2.0 * dot + 2.0 * full,
        reduced: 4.0 * lap,
        grad_laplacian_norm: g.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// Compare the candidates with the discrete `Δ²u` at each point. The derived
/// identity gates the verdict; `4Δf` gates where `∇Δf = 0`; the printed
/// coefficients are recorded without gating.
pub fn verify_elliptic_fourth_order(
    domain: &Domain,
    f: &dyn TestFunction,
    xs: &[Vec<f64>],
    h: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("elliptic_fourth_order");
    report.meta("domain", domain);
    report.meta("f", f.name());
    report.meta("h", h);
    for x in xs {
        let c = fourth_order_candidates(domain, f, x, h)?;
        let tag = format!("f={};x={}", f.name(), format_point(x));
        report.push(ReportRow::absolute(format!("derived_rhs[{tag}]"), c.derived, c.bilaplacian_u, tol));
        let reduced = format!("four_laplacian_rhs[{tag}]");
        if c.grad_laplacian_norm < 1e-9 {
            report.push(ReportRow::absolute(reduced, c.reduced, c.bilaplacian_u, tol));
        } else {
            report.push(ReportRow::informational(reduced, c.reduced, c.bilaplacian_u, tol));
        }
        report.push(ReportRow::informational(format!("printed_rhs[{tag}]"), c.printed, c.bilaplacian_u, tol));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::Builtin;
    use approx::assert_abs_diff_eq;

    #[test]
    fn boundary_start_is_immediate() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let s = sample_iterated_exit(&[1.0], &d, &ExitSettings::new(1e-3), Seed::new(1)).unwrap();
        assert_eq!((s.t, s.tau), (0.0, 0.0));
        assert_eq!(s.exit_point, vec![1.0]);
        assert!(sample_iterated_exit(&[1.5], &d, &ExitSettings::new(1e-3), Seed::new(1)).is_err());
    }

    #[test]
    fn exit_points_lie_on_boundary() {
        let d = Domain::centered_ball(1.0, 2).unwrap();
        for i in 0..50 {
            let s = sample_iterated_exit(&[0.2, 0.1], &d, &ExitSettings::new(1e-2), Seed::new(7).derive(i)).unwrap();
            assert_abs_diff_eq!(d.boundary_distance(&s.exit_point), 0.0, epsilon = 1e-12);
            assert!(s.t >= 0.0 && s.tau > 0.0);
        }
    }

    #[test]
    fn budget_is_reported() {
        let d = Domain::interval(-10.0, 10.0).unwrap();
        let mut st = ExitSettings::new(1e-3);
        st.max_steps = 10;
        assert!(matches!(
            sample_iterated_exit(&[0.0], &d, &st, Seed::new(3)),
            Err(Error::BudgetExceeded { steps: 10 })
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let st = ExitSettings::new(1e-3);
        let a = sample_iterated_exit(&[0.3], &d, &st, Seed::new(9)).unwrap();
        let b = sample_iterated_exit(&[0.3], &d, &st, Seed::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ito_expansion_on_fixtures() {
        let r = ito_truncation_check(&Builtin::Square, 0.7, &[0.2], 1e-8).unwrap();
        let row = &r.rows[0];
        assert_abs_diff_eq!(row.theoretical, 0.74, epsilon = 1e-14);
        assert!(r.pass());
        assert!(ito_truncation_check(&Builtin::Gauss, 0.7, &[0.2], 1e-8).is_err());
    }

    #[test]
    fn fourth_order_cube() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let c = fourth_order_candidates(&d, &Builtin::Cube, &[0.5], 0.05).unwrap();
        assert_abs_diff_eq!(c.bilaplacian_u, 60.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c.derived, 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.printed, 36.0, epsilon = 1e-12);
    }
}
