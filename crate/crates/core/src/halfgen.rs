//! Half-derivative generator of Brownian-time Brownian motion.
//!
//! For the process observed at `X(s) = ξ`, started at `x0` on the inner
//! clock started at 0,
//!
//! ```text
//! lim_{t↓s} (E[f(X(t)) | X(s) = ξ] - f(ξ)) / sqrt(t - s)
//!     = (A f(ξ) + N / D) / sqrt(2 pi)
//! ```
//!
//! with `A = Δ/2`, `N/D` the average of the time-reversed generator
//! `A*_y f(ξ) = f''(ξ)/2 + (x0 - ξ) f'(ξ) / y` against
//! `p(0, s; 0, y) h(0, y; x0, ξ) dy`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{heat_kernel, reflected_kernel};
use crate::quadrature::{integrate, QuadratureSettings};
use crate::rng::Seed;
use crate::stats::{linear_fit, sample_variance, Estimate};
use crate::testfn::TestFunction;

/// Point at which the half-derivative generator is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct HalfGenQuery<'a> {
    /// Conditioning time.
    pub s: f64,
    /// Observed value of the process at time `s`.
    pub xi: f64,
    /// Starting point of the outer Brownian motion.
    pub x0: f64,
    pub f: &'a dyn TestFunction,
}

impl HalfGenQuery<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("conditioning time must be positive, got {}", self.s)));
        }
        if !(self.xi.is_finite() && self.x0.is_finite()) {
            return Err(Error::invalid("xi and x0 must be finite"));
        }
        Ok(())
    }
}

/// `A*_y f(ξ) = f''(ξ)/2 + (x0 - ξ) f'(ξ) / y`: generator of Brownian motion
/// from `x0` run backwards from time `y`.
pub fn reversed_generator(f: &dyn TestFunction, y: f64, xi: f64, x0: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("reversal time must be positive, got {y}")));
    }
    let p = [xi];
    Ok(0.5 * f.laplacian(&p) + (x0 - xi) / y * f.gradient(&p)[0])
}

/// Quadrature value of the half-derivative generator.
///
/// The integrals over `y` are computed after the substitution `y = w²`,
/// which removes the `y^{-1/2}` factor of the heat kernel. At `ξ = x0` the
/// drift part of `A*_y` is identically zero and is not integrated.
pub fn halfgen_quadrature(q: &HalfGenQuery<'_>, settings: &QuadratureSettings) -> Result<f64> {
    q.validate()?;
    settings.validate()?;
    let p = [q.xi];
    let second = 0.5 * q.f.laplacian(&p);
    let slope = q.f.gradient(&p)[0];
    let gen = second;
    let drift_scale = (q.x0 - q.xi) * slope;
    let average = if drift_scale == 0.0 {
        second
    } else {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let weight = |w: f64| -> f64 {
            if w <= 0.0 {
                return 0.0;
            }
            let y = w * w;
            let v = reflected_kernel(0.0, q.s, 0.0, y)
                .and_then(|pk| heat_kernel(0.0, y, &[q.x0], &[q.xi]).map(|hk| pk * hk * 2.0 * w));
            match v {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let upper = (settings.truncation_radius_multiplier * q.s.sqrt()).sqrt();
        let d = integrate(weight, 0.0, upper, settings)?.value;
        let n = integrate(|w| if w > 0.0 { weight(w) / (w * w) } else { 0.0 }, 0.0, upper, settings)?.value;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        if !(d > 0.0) {
            return Err(Error::NumericalDomain(format!(
                "normalising integral underflowed (ξ={}, x0={}, s={})",
                q.xi, q.x0, q.s
            )));
        }
        second + drift_scale * n / d
    };
    Ok((gen + average) / (2.0 * PI).sqrt())
}

/// Minimum effective sample size `(Σw)² / Σw²` inside the kernel window.
pub const MIN_EFFECTIVE_SAMPLES: usize = 100;

const BOOTSTRAP_REPLICATES: usize = 200;
const BLOCK: usize = 4096;

/// Draw `n` pairs `(X(s), X(s + δ))` of Brownian-time Brownian motion.
pub fn sample_pairs(s: f64, delta: f64, x0: f64, n: usize, seed: Seed) -> Vec<(f64, f64)> {
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = seed.derive(b as u64).rng();
            let count = BLOCK.min(n - b * BLOCK);
            (0..count)
                .map(|_| {
                    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let bs = s.sqrt() * z[0];
                    let bt = bs + delta.sqrt() * z[1];
                    let (a, c) = (bs.abs(), bt.abs());
                    let (lo, hi) = if a <= c { (a, c) } else { (c, a) };
                    let x_lo = x0 + lo.sqrt() * z[2];
                    let x_hi = x_lo + (hi - lo).sqrt() * z[3];
                    if a <= c {
                        (x_lo, x_hi)
                    } else {
                        (x_hi, x_lo)
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Window of a kernel regression at `xi`: offsets, responses, weights.
struct Window {
    d: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Window {
    fn new(pairs: &[(f64, f64)], f: &dyn TestFunction, xi: f64, bandwidth: f64) -> Self {
        let mut win = Window {
            d: Vec::new(),
            y: Vec::new(),
            w: Vec::new(),
        };
        for &(a, b) in pairs {
            let u = (a - xi) / bandwidth;
            if u.abs() <= 6.0 {
                win.d.push(a - xi);
                win.y.push(f.value(&[b]) - f.value(&[a]));
                win.w.push((-0.5 * u * u).exp());
            }
        }
        win
    }

    fn effective_size(&self) -> f64 {
        let s: f64 = self.w.iter().sum();
        let s2: f64 = self.w.iter().map(|w| w * w).sum();
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    }

    /// Local-linear fit at offset 0, over the given index multiset.
    fn local_linear(&self, idx: impl Iterator<Item = usize>) -> f64 {
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in idx {
            let (w, d, y) = (self.w[i], self.d[i], self.y[i]);
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            t0 += w * y;
            t1 += w * d * y;
        }
        let det = s0 * s2 - s1 * s1;
        if det.abs() <= 1e-14 * s0 * s2 {
            t0 / s0
        } else {
            (s2 * t0 - s1 * t1) / det
        }
    }
}

/// Abscissa used to extrapolate the difference quotients to `δ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Affine in `sqrt(δ)`.
    RootDelta,
    /// Affine in `δ^(1/4)`.
    QuarterRootDelta,
    /// `δ^(1/4)` when `(ξ - x0)²` does not exceed the largest increment,
    /// `sqrt(δ)` otherwise.
    ///
    /// Conditional on `X(s) = ξ` the clock value `|B(s)|` has density
    /// proportional to `φ_s(a) exp(-(ξ - x0)²/2a) / sqrt(a)`. At `ξ = x0`
    /// the `a^(-1/2)` mass near zero makes the quotient converge like
    /// `δ^(1/4)`; away from `x0` it is suppressed on scales below
    /// `(ξ - x0)²` and the correction is of order `sqrt(δ)`.
    Auto,
}

impl Extrapolation {
    fn exponent(self, q: &HalfGenQuery<'_>, largest_delta: f64) -> f64 {
        match self {
            Extrapolation::RootDelta => 0.5,
            Extrapolation::QuarterRootDelta => 0.25,
            Extrapolation::Auto => {
                if (q.xi - q.x0).powi(2) <= largest_delta {
                    0.25
                } else {
                    0.5
                }
            }
        }
    }
}

/// Per-increment difference quotients and the extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfGenMc {
    pub estimate: Estimate,
    pub deltas: Vec<f64>,
    /// Difference quotient at each increment.
    pub quotients: Vec<f64>,
    /// Power of `δ` used as the extrapolation abscissa.
    pub exponent: f64,
}

/// Monte Carlo half-derivative generator: local-linear Gaussian-kernel
/// regression of `f(X(s+δ)) - f(X(s))` on `X(s)` at `ξ`, divided by `sqrt(δ)`,
/// extrapolated to `δ = 0` by least squares (see [`Extrapolation::Auto`]).
/// The standard error is a pairs bootstrap of the whole pipeline.
pub fn halfgen_mc(
    q: &HalfGenQuery<'_>,
    deltas: &[f64],
    n: usize,
    bandwidth: f64,
    seed: Seed,
) -> Result<HalfGenMc> {
    halfgen_mc_with(q, deltas, n, bandwidth, Extrapolation::Auto, seed)
}

/// [`halfgen_mc`] with an explicit extrapolation abscissa.
pub fn halfgen_mc_with(
    q: &HalfGenQuery<'_>,
    deltas: &[f64],
    n: usize,
    bandwidth: f64,
    extrapolation: Extrapolation,
    seed: Seed,
) -> Result<HalfGenMc> {
    q.validate()?;
    if deltas.len() < 2 {
        return Err(Error::invalid("need at least two increments to extrapolate"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("increments must be positive and strictly decreasing"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let windows: Vec<Window> = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| {
            let pairs = sample_pairs(q.s, delta, q.x0, n, seed.derive(j as u64));
            Window::new(&pairs, q.f, q.xi, bandwidth)
        })
        .collect();
    for win in &windows {
        let eff = win.effective_size();
        if eff < MIN_EFFECTIVE_SAMPLES as f64 {
            return Err(Error::InsufficientData {
                effective: eff,
                required: MIN_EFFECTIVE_SAMPLES,
            });
        }
    }
    let roots: Vec<f64> = deltas.iter().map(|d| d.sqrt()).collect();
    let exponent = extrapolation.exponent(q, deltas[0]);
    let abscissae: Vec<f64> = deltas.iter().map(|d| d.powf(exponent)).collect();
    let extrapolate = |quotients: &[f64]| -> Result<f64> { Ok(linear_fit(&abscissae, quotients)?.intercept) };

    let quotients: Vec<f64> = windows
        .iter()
        .zip(&roots)
        .map(|(w, r)| w.local_linear(0..w.w.len()) / r)
        .collect();
    let value = extrapolate(&quotients)?;

    let boot_seed = seed.derive(u64::MAX);
    let replicates = (0..BOOTSTRAP_REPLICATES)
        .into_par_iter()
        .map(|b| {
            let mut rng = boot_seed.derive(b as u64).rng();
            let qs: Vec<f64> = windows
                .iter()
                .zip(&roots)
                .map(|(w, r)| {
                    let m = w.w.len();
                    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
                    w.local_linear(idx.into_iter()) / r
                })
                .collect();
            extrapolate(&qs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(HalfGenMc {
        estimate: Estimate {
            value,
            stderr: sample_variance(&replicates).sqrt(),
            n,
        },
        deltas: deltas.to_vec(),
        quotients,
        exponent,
    })
}
