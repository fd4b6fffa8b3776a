//! Scalar test functions with derivatives through order four.
//!
//! Built-in fixtures supply every derivative analytically. Custom
//! implementations may rely on the central-difference fallbacks, which are
//! adequate for smoke tests but not for the fourth-order residual checks.

use std::fmt;

use crate::error::{Error, Result};

const FD_STEP: f64 = 1e-3;

/// A scalar field on `R^d` with derivatives through order four.
///
/// Matrices are returned row-major as `d * d` vectors.
pub trait TestFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn value(&self, x: &[f64]) -> f64;

    /// Degree of polynomial growth, `None` if bounded.
    fn growth_degree(&self) -> Option<u32> {
        None
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        central_gradient(|y| self.value(y), x)
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        let mut y = x.to_vec();
        for j in 0..d {
            y[j] = x[j] + FD_STEP;
            let gp = self.gradient(&y);
            y[j] = x[j] - FD_STEP;
            let gm = self.gradient(&y);
            y[j] = x[j];
            for i in 0..d {
                h[i * d + j] = (gp[i] - gm[i]) / (2.0 * FD_STEP);
            }
        }
        h
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let h = self.hessian(x);
        (0..d).map(|i| h[i * d + i]).sum()
    }

    /// `grad(Δf)`.
    fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        central_gradient(|y| self.laplacian(y), x)
    }

    /// Hessian of `Δf`, i.e. `D_ij Δf`.
    fn hessian_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        let mut y = x.to_vec();
        for j in 0..d {
            y[j] = x[j] + FD_STEP;
            let gp = self.grad_laplacian(&y);
            y[j] = x[j] - FD_STEP;
            let gm = self.grad_laplacian(&y);
            y[j] = x[j];
            for i in 0..d {
                h[i * d + j] = (gp[i] - gm[i]) / (2.0 * FD_STEP);
            }
        }
        h
    }

    fn bilaplacian(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let h = self.hessian_laplacian(x);
        (0..d).map(|i| h[i * d + i]).sum()
    }
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + FD_STEP;
            let fp = f(&y);
            y[i] = x[i] - FD_STEP;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Registry of fixtures with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `c`
    Constant(f64),
    /// `x_1`
    Linear,
    /// `|x|^2`
    Square,
    /// `x_1^3`
    Cube,
    /// `exp(-|x|^2)`
    Gauss,
    /// `cos(x_1)`
    Cosine,
    /// `x_1^2 - x_2^2`
    Harmonic2d,
}

impl Builtin {
    pub const NAMES: [&'static str; 7] = [
        "constant",
        "linear",
        "square",
        "cube",
        "gauss",
        "cosine",
        "harmonic2d",
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "constant" => Builtin::Constant(1.0),
            "linear" => Builtin::Linear,
            "square" => Builtin::Square,
            "cube" => Builtin::Cube,
            "gauss" => Builtin::Gauss,
            "cosine" => Builtin::Cosine,
            "harmonic2d" => Builtin::Harmonic2d,
            other => {
                return Err(Error::invalid(format!(
                    "unknown test function '{other}' (known: {})",
                    Builtin::NAMES.join(", ")
                )))
            }
        })
    }

    /// Smallest dimension the fixture is defined on.
    pub fn min_dim(&self) -> usize {
        match self {
            Builtin::Harmonic2d => 2,
            _ => 1,
        }
    }

    /// Whether `Δ²f ≡ 0`.
    pub fn is_biharmonic(&self) -> bool {
        !matches!(self, Builtin::Gauss | Builtin::Cosine)
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl TestFunction for Builtin {
    fn name(&self) -> String {
        match self {
            Builtin::Constant(c) if *c == 1.0 => "constant".into(),
            Builtin::Constant(c) => format!("constant({c})"),
            Builtin::Linear => "linear".into(),
            Builtin::Square => "square".into(),
            Builtin::Cube => "cube".into(),
            Builtin::Gauss => "gauss".into(),
            Builtin::Cosine => "cosine".into(),
            Builtin::Harmonic2d => "harmonic2d".into(),
        }
    }

    fn growth_degree(&self) -> Option<u32> {
        match self {
            Builtin::Constant(_) | Builtin::Gauss | Builtin::Cosine => None,
            Builtin::Linear => Some(1),
            Builtin::Square | Builtin::Harmonic2d => Some(2),
            Builtin::Cube => Some(3),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Builtin::Constant(c) => *c,
            Builtin::Linear => x[0],
            Builtin::Square => norm2(x),
            Builtin::Cube => x[0].powi(3),
            Builtin::Gauss => (-norm2(x)).exp(),
            Builtin::Cosine => x[0].cos(),
            Builtin::Harmonic2d => x[0] * x[0] - x[1] * x[1],
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            Builtin::Constant(_) => {}
            Builtin::Linear => g[0] = 1.0,
            Builtin::Square => g.iter_mut().zip(x).for_each(|(g, x)| *g = 2.0 * x),
            Builtin::Cube => g[0] = 3.0 * x[0] * x[0],
            Builtin::Gauss => {
                let f = self.value(x);
                g.iter_mut().zip(x).for_each(|(g, x)| *g = -2.0 * x * f);
            }
            Builtin::Cosine => g[0] = -x[0].sin(),
            Builtin::Harmonic2d => {
                g[0] = 2.0 * x[0];
                g[1] = -2.0 * x[1];
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        match self {
            Builtin::Constant(_) | Builtin::Linear => {}
            Builtin::Square => (0..d).for_each(|i| h[i * d + i] = 2.0),
            Builtin::Cube => h[0] = 6.0 * x[0],
            Builtin::Gauss => {
                let f = self.value(x);
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 2.0 } else { 0.0 };
                        h[i * d + j] = (4.0 * x[i] * x[j] - delta) * f;
                    }
                }
            }
            Builtin::Cosine => h[0] = -x[0].cos(),
            Builtin::Harmonic2d => {
                h[0] = 2.0;
                h[d + 1] = -2.0;
            }
        }
        h
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self {
            Builtin::Constant(_) | Builtin::Linear | Builtin::Harmonic2d => 0.0,
            Builtin::Square => 2.0 * d,
            Builtin::Cube => 6.0 * x[0],
            Builtin::Gauss => (4.0 * norm2(x) - 2.0 * d) * self.value(x),
            Builtin::Cosine => -x[0].cos(),
        }
    }

    fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut g = vec![0.0; d];
        match self {
            Builtin::Cube => g[0] = 6.0,
            Builtin::Cosine => g[0] = x[0].sin(),
            Builtin::Gauss => {
                let f = self.value(x);
                let a = 8.0 + 4.0 * d as f64 - 8.0 * norm2(x);
                g.iter_mut().zip(x).for_each(|(g, x)| *g = x * a * f);
            }
            _ => {}
        }
        g
    }

    fn hessian_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        match self {
            Builtin::Cosine => h[0] = x[0].cos(),
            Builtin::Gauss => {
                let f = self.value(x);
                let a = 8.0 + 4.0 * d as f64 - 8.0 * norm2(x);
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { a } else { 0.0 };
                        h[i * d + j] = f * (delta - x[i] * x[j] * (16.0 + 2.0 * a));
                    }
                }
            }
            _ => {}
        }
        h
    }

    fn bilaplacian(&self, x: &[f64]) -> f64 {
        match self {
            Builtin::Cosine => x[0].cos(),
            Builtin::Gauss => {
                let d = x.len() as f64;
                let r2 = norm2(x);
                let a = 8.0 + 4.0 * d - 8.0 * r2;
                self.value(x) * (d * a - r2 * (16.0 + 2.0 * a))
            }
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Wraps a builtin but exposes only its value, forcing the FD fallbacks.
    #[derive(Debug)]
    struct ValueOnly(Builtin);
    impl TestFunction for ValueOnly {
        fn name(&self) -> String {
            self.0.name()
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.0.value(x)
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let points: [&[f64]; 3] = [&[0.3, -0.2], &[-0.7, 0.5], &[1.1, 0.05]];
        for b in [
            Builtin::Linear,
            Builtin::Square,
            Builtin::Cube,
            Builtin::Gauss,
            Builtin::Cosine,
            Builtin::Harmonic2d,
        ] {
            let fd = ValueOnly(b);
            for x in points {
                for (a, n) in b.gradient(x).iter().zip(fd.gradient(x)) {
                    assert_abs_diff_eq!(*a, n, epsilon = 1e-5);
                }
                for (a, n) in b.hessian(x).iter().zip(fd.hessian(x)) {
                    assert_abs_diff_eq!(*a, n, epsilon = 1e-4);
                }
                assert_abs_diff_eq!(b.laplacian(x), fd.laplacian(x), epsilon = 1e-4);
                // Third and fourth derivatives checked against FD of the analytic Laplacian.
                let lap_only = central_gradient(|y| b.laplacian(y), x);
                for (a, n) in b.grad_laplacian(x).iter().zip(lap_only) {
                    assert_abs_diff_eq!(*a, n, epsilon = 1e-4);
                }
                let mut y = x.to_vec();
                let d = x.len();
                for j in 0..d {
                    y[j] = x[j] + FD_STEP;
                    let gp = b.grad_laplacian(&y);
                    y[j] = x[j] - FD_STEP;
                    let gm = b.grad_laplacian(&y);
                    y[j] = x[j];
                    for i in 0..d {
                        let n = (gp[i] - gm[i]) / (2.0 * FD_STEP);
                        assert_abs_diff_eq!(b.hessian_laplacian(x)[i * d + j], n, epsilon = 1e-4);
                    }
                }
                let hl = b.hessian_laplacian(x);
                assert_abs_diff_eq!(b.bilaplacian(x), hl[0] + hl[3], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn registry_round_trip() {
        for name in Builtin::NAMES {
            assert_eq!(Builtin::from_name(name).unwrap().name(), name);
        }
        assert!(Builtin::from_name("nope").is_err());
    }

    #[test]
    fn gauss_bilaplacian_1d() {
        let x = 0.4f64;
        let expected = (16.0 * x.powi(4) - 48.0 * x * x + 12.0) * (-x * x).exp();
        assert_abs_diff_eq!(Builtin::Gauss.bilaplacian(&[x]), expected, epsilon = 1e-14);
    }
}
