//! Statistical checks of the excursion-based constructions: equal one-time
//! marginals for every `k`, two-time joint laws approaching the fresh-copy
//! limit as `k` grows, and moment scaling of increments.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::compose::BtpSampler;
use crate::error::{Error, Result};
use crate::paths::TimeGrid;
use crate::rng::Seed;
use crate::stats::{ks_two_sample, linear_fit, mean, sample_variance, KsOutcome};

/// Which composed process to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Btp,
    /// `k` copies chosen uniformly per excursion.
    Kebtp(usize),
    /// A fresh copy per excursion.
    Ebtp,
}

impl Variant {
    fn sample(self, sampler: &BtpSampler, seed: Seed) -> Result<crate::compose::ComposedPath> {
        match self {
            Variant::Btp => sampler.btp(seed),
            Variant::Kebtp(k) => sampler.kebtp(k, seed),
            Variant::Ebtp => sampler.ebtp(seed),
        }
    }
}

/// Inner-clock resolution used by the checks in this module.
pub const DEFAULT_INNER_STEPS: usize = 64;

/// Values of a one-dimensional Brownian-time Brownian motion from 0 at the
/// grid times `at` (which must be nodes of `grid`), one row per replicate.
pub fn sample_values(
    variant: Variant,
    grid: &TimeGrid,
    at: &[f64],
    n: usize,
    seed: Seed,
) -> Result<Vec<Vec<f64>>> {
    let idx = at
        .iter()
        .map(|&t| {
            grid.index_of(t)
                .ok_or_else(|| Error::invalid(format!("time {t} is not a grid node")))
        })
        .collect::<Result<Vec<_>>>()?;
    let sampler = BtpSampler::brownian(vec![0.0], grid.clone());
    (0..n)
        .into_par_iter()
        .map(|i| {
            let c = variant.sample(&sampler, seed.derive(i as u64))?;
            Ok(idx.iter().map(|&j| c.path.value(j)[0]).collect())
        })
        .collect()
}

fn grid_with(end: f64, steps: usize, extra: &[f64]) -> Result<TimeGrid> {
    let base = TimeGrid::uniform(end, steps)?;
    TimeGrid::covering(base.times().iter().copied().chain(extra.iter().copied()))
}

/// Two-sample KS test of the kEBTP terminal value against the BTP terminal
/// value at time `t`, on an inner grid of [`DEFAULT_INNER_STEPS`] steps.
pub fn marginal_match_test(k: usize, t: f64, n: usize, seed: Seed) -> Result<KsOutcome> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    let grid = TimeGrid::uniform(t, DEFAULT_INNER_STEPS)?;
    let a: Vec<f64> = sample_values(Variant::Kebtp(k), &grid, &[t], n, seed.derive(0))?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let b: Vec<f64> = sample_values(Variant::Btp, &grid, &[t], n, seed.derive(1))?
        .into_iter()
        .map(|r| r[0])
        .collect();
    ks_two_sample(&a, &b)
}

/// Levels of the fixed quantile grid per coordinate.
pub const QUANTILE_LEVELS: usize = 20;
const BOOTSTRAP_REPLICATES: usize = 200;

/// Maximum absolute difference of bivariate empirical CDFs over a
/// `20 x 20` grid of pooled marginal quantiles, with a bootstrap standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistance {
    pub distance: f64,
    pub stderr: f64,
    pub n: usize,
}

fn quantile_cuts(values: &mut [f64]) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    (1..=QUANTILE_LEVELS)
        .map(|i| {
            let q = i as f64 / (QUANTILE_LEVELS + 1) as f64;
            values[((q * m as f64) as usize).min(m - 1)]
        })
        .collect()
}

const CELLS: usize = QUANTILE_LEVELS + 1;

/// Cell `(i, j)` counts points with exactly `i` x-cuts and `j` y-cuts
/// strictly below them.
fn cell_counts(sample: &[(f64, f64)], cx: &[f64], cy: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; CELLS * CELLS];
    for &(x, y) in sample {
        let i = cx.partition_point(|c| *c < x);
        let j = cy.partition_point(|c| *c < y);
        counts[i * CELLS + j] += 1;
    }
    counts
}

/// `F(cut_a, cut_b)` for every grid point, from cell counts.
fn cdf_on_grid(counts: &[u64], n: u64) -> Vec<f64> {
    // Cumulative over cells (i' <= a, j' <= b) for a, b < QUANTILE_LEVELS.
    let mut cum = vec![0u64; CELLS * CELLS];
    for i in 0..CELLS {
        let mut row = 0;
        for j in 0..CELLS {
            row += counts[i * CELLS + j];
            cum[i * CELLS + j] = row + if i > 0 { cum[(i - 1) * CELLS + j] } else { 0 };
        }
    }
    let mut out = Vec::with_capacity(QUANTILE_LEVELS * QUANTILE_LEVELS);
    for a in 0..QUANTILE_LEVELS {
        for b in 0..QUANTILE_LEVELS {
            out.push(cum[a * CELLS + b] as f64 / n as f64);
        }
    }
    out
}

fn max_diff(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
}

fn resample_counts(counts: &[u64], n: u64, rng: &mut impl Rng) -> Vec<u64> {
    let mut left = n;
    let mut mass = n;
    counts
        .iter()
        .map(|&c| {
            if left == 0 || c == 0 {
                mass -= c;
                return 0;
            }
            let p = (c as f64 / mass as f64).min(1.0);
            mass -= c;
            let draw = Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(left);
            left -= draw;
            draw
        })
        .collect()
}

/// Quantile-grid CDF distance between two bivariate samples.
pub fn bivariate_cdf_distance(a: &[(f64, f64)], b: &[(f64, f64)], seed: Seed) -> Result<JointDistance> {
    if a.len() < 2 * CELLS || b.len() < 2 * CELLS {
        return Err(Error::invalid("samples too small for the quantile grid"));
    }
    let mut xs: Vec<f64> = a.iter().chain(b).map(|p| p.0).collect();
    let mut ys: Vec<f64> = a.iter().chain(b).map(|p| p.1).collect();
    let cx = quantile_cuts(&mut xs);
    let cy = quantile_cuts(&mut ys);
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let ca = cell_counts(a, &cx, &cy);
    let cb = cell_counts(b, &cx, &cy);
    let distance = max_diff(&cdf_on_grid(&ca, na), &cdf_on_grid(&cb, nb));
    let reps: Vec<f64> = (0..BOOTSTRAP_REPLICATES)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.derive(r as u64).rng();
            let ra = resample_counts(&ca, na, &mut rng);
            let rb = resample_counts(&cb, nb, &mut rng);
            max_diff(&cdf_on_grid(&ra, na), &cdf_on_grid(&rb, nb))
        })
        .collect();
    Ok(JointDistance {
        distance,
        stderr: sample_variance(&reps).sqrt(),
        n: a.len().min(b.len()),
    })
}

/// Two-time samples `(X(s), X(t))` of a variant on an inner grid of
/// [`DEFAULT_INNER_STEPS`] steps over `[0, t]` that contains `s`.
pub fn two_time_sample(variant: Variant, times: (f64, f64), n: usize, seed: Seed) -> Result<Vec<(f64, f64)>> {
    let (s, t) = times;
    if !(s > 0.0 && s < t) {
        return Err(Error::invalid(format!("need 0 < s < t, got ({s}, {t})")));
    }
    let grid = grid_with(t, DEFAULT_INNER_STEPS, &[s])?;
    Ok(sample_values(variant, &grid, &[s, t], n, seed)?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

/// Distance between the `(X(s), X(t))` laws of kEBTP and EBTP.
pub fn joint_law_distance(k: usize, times: (f64, f64), n: usize, seed: Seed) -> Result<JointDistance> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let a = two_time_sample(Variant::Kebtp(k), times, n, seed.derive(0))?;
    let b = two_time_sample(Variant::Ebtp, times, n, seed.derive(1))?;
    bivariate_cdf_distance(&a, &b, seed.derive(2))
}

/// Distance between two independent EBTP samples: the noise floor of
/// [`joint_law_distance`] at the same `n`.
pub fn joint_law_noise_floor(times: (f64, f64), n: usize, seed: Seed) -> Result<JointDistance> {
    let a = two_time_sample(Variant::Ebtp, times, n, seed.derive(0))?;
    let b = two_time_sample(Variant::Ebtp, times, n, seed.derive(1))?;
    bivariate_cdf_distance(&a, &b, seed.derive(2))
}

/// Log-log regression of increment moments on lags.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub p: f64,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub moment_stderrs: Vec<f64>,
    pub log_moments: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// `E|X(1 + lag) - X(1)|^p` for Brownian-time Brownian motion at each lag
/// and the slope of `log moment` against `log lag`.
pub fn holder_scaling(p: f64, lags: &[f64], n: usize, seed: Seed) -> Result<ScalingReport> {
    if !(p > 0.0) {
        return Err(Error::invalid(format!("moment order must be positive, got {p}")));
    }
    if lags.len() < 3 {
        return Err(Error::invalid(format!(
            "scaling fit needs at least 3 lags, got {}",
            lags.len()
        )));
    }
    if lags.iter().any(|l| !(*l > 0.0 && *l <= 0.5)) {
        return Err(Error::invalid("lags must lie in (0, 0.5]"));
    }
    if lags.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("lags must be strictly decreasing"));
    }
    if n < 2 {
        return Err(Error::invalid("need n >= 2"));
    }
    let mut moments = Vec::with_capacity(lags.len());
    let mut stderrs = Vec::with_capacity(lags.len());
    for (j, &lag) in lags.iter().enumerate() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 1.0 + lag])?;
        let rows = sample_values(Variant::Btp, &grid, &[1.0, 1.0 + lag], n, seed.derive(j as u64))?;
        let vals: Vec<f64> = rows.iter().map(|r| (r[1] - r[0]).abs().powf(p)).collect();
        moments.push(mean(&vals));
        stderrs.push((sample_variance(&vals) / n as f64).sqrt());
    }
    if moments.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::DegenerateStatistics("zero moment estimate".into()));
    }
    let log_lags: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let log_moments: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&log_lags, &log_moments)?;
    // Sampling error of each log-moment, propagated through the slope, added
    // to the residual-based error.
    let mx = mean(&log_lags);
    let sxx: f64 = log_lags.iter().map(|x| (x - mx).powi(2)).sum();
    let sampling: f64 = log_lags
        .iter()
        .zip(moments.iter().zip(&stderrs))
        .map(|(x, (m, s))| ((x - mx) / sxx * s / m).powi(2))
        .sum();
    Ok(ScalingReport {
        p,
        lags: lags.to_vec(),
        moments,
        moment_stderrs: stderrs,
        log_moments,
        slope: fit.slope,
        slope_stderr: (fit.slope_stderr.powi(2) + sampling).sqrt(),
    })
}
