//! Monte Carlo statistics: estimates with standard errors, z-scores,
//! two-sample Kolmogorov-Smirnov, least squares and normality checks.
//!
//! All sums go through [`pairwise_sum`] so that a reduction over replicates
//! does not depend on how the replicates were produced.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Tree summation. Deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// A Monte Carlo value with its standard error and replicate count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean with `stderr = sd / sqrt(n)`.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::DegenerateStatistics("no samples".into()));
        }
        let n = xs.len();
        Ok(Estimate {
            value: mean(xs),
            stderr: (sample_variance(xs) / n as f64).sqrt(),
            n,
        })
    }

    /// A deterministic quantity (zero standard error).
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            stderr: 0.0,
            n: 1,
        }
    }

    pub fn z_score(&self, theoretical: f64) -> Result<f64> {
        z_score(self.value, self.stderr, theoretical)
    }
}

fn z_score(value: f64, stderr: f64, theoretical: f64) -> Result<f64> {
    let diff = value - theoretical;
    if stderr > 0.0 {
        Ok(diff / stderr)
    } else if diff == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::DegenerateStatistics(format!(
            "zero standard error but value {value} != theoretical {theoretical}"
        )))
    }
}

/// Outcome of comparing an estimate to a theoretical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub z: f64,
    pub pass: bool,
}

/// Pass threshold on |z|.
pub const Z_THRESHOLD: f64 = 3.0;

/// Pool the estimates (replicate-weighted) and compare with `theoretical`.
pub fn summarize(estimates: &[Estimate], theoretical: f64) -> Result<Summary> {
    if estimates.is_empty() {
        return Err(Error::DegenerateStatistics("no estimates".into()));
    }
    let total: usize = estimates.iter().map(|e| e.n).sum();
    if total < 2 && estimates.iter().any(|e| e.stderr > 0.0) {
        return Err(Error::DegenerateStatistics("need n >= 2".into()));
    }
    let (value, stderr) = if estimates.len() == 1 {
        (estimates[0].value, estimates[0].stderr)
    } else {
        let w: Vec<f64> = estimates.iter().map(|e| e.n as f64 / total as f64).collect();
        let v: Vec<f64> = estimates.iter().zip(&w).map(|(e, w)| w * e.value).collect();
        let s: Vec<f64> = estimates
            .iter()
            .zip(&w)
            .map(|(e, w)| (w * e.stderr).powi(2))
            .collect();
        (pairwise_sum(&v), pairwise_sum(&s).sqrt())
    };
    let z = z_score(value, stderr, theoretical)?;
    Ok(Summary {
        z,
        pass: z.abs() <= Z_THRESHOLD,
    })
}

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test with the asymptotic Kolmogorov distribution
/// (Stephens' small-sample correction on the effective size).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsOutcome> {
    if xs.len() < 8 || ys.len() < 8 {
        return Err(Error::invalid("KS test needs at least 8 samples per side"));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    if a.iter().chain(&b).any(|v| v.is_nan()) {
        return Err(Error::NumericalDomain("NaN in KS sample".into()));
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Least squares line. Needs at least two distinct abscissae; standard
/// errors come from the residual variance and are zero for two points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("linear fit needs >= 2 paired points"));
    }
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx).powi(2)).collect::<Vec<_>>());
    if sxx <= 0.0 {
        return Err(Error::invalid("linear fit needs distinct abscissae"));
    }
    let sxy = pairwise_sum(
        &xs.iter()
            .zip(ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .collect::<Vec<_>>(),
    );
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, intercept_stderr) = if xs.len() > 2 {
        let rss = pairwise_sum(
            &xs.iter()
                .zip(ys)
                .map(|(x, y)| (y - intercept - slope * x).powi(2))
                .collect::<Vec<_>>(),
        );
        let s2 = rss / (n - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / n + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LinearFit {
        intercept,
        slope,
        intercept_stderr,
        slope_stderr,
    })
}

/// Jarque-Bera normality test; returns the p-value.
pub fn jarque_bera(xs: &[f64]) -> Result<f64> {
    if xs.len() < 8 {
        return Err(Error::invalid("normality test needs at least 8 samples"));
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = pairwise_sum(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>()) / n;
    let m3 = pairwise_sum(&xs.iter().map(|x| (x - m).powi(3)).collect::<Vec<_>>()) / n;
    let m4 = pairwise_sum(&xs.iter().map(|x| (x - m).powi(4)).collect::<Vec<_>>()) / n;
    if m2 <= 0.0 {
        return Err(Error::DegenerateStatistics("zero variance".into()));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
    let chi2 = ChiSquared::new(2.0).expect("valid dof");
    Ok(1.0 - chi2.cdf(jb))
}
