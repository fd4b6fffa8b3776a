//! Transition kernels and the quadrature form of the one-time marginal
//!
//! ```text
//! E f(X^x(|B(t)|)) = 2 ∫_0^∞ p_t(0, s) T_s f(x) ds
//! ```
//!
//! where `p_t(0, ·)` is the `N(0, t)` density and `T_s` the outer semigroup
//! (Gaussian convolution for Brownian outer motion).

use std::cell::RefCell;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line, QuadratureSettings};
use crate::testfn::TestFunction;

/// Gaussian transition density from `x` at time `s` to `y` at time `t`.
pub fn heat_kernel(s: f64, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > s) {
        return Err(Error::invalid(format!("heat kernel needs t > s (s={s}, t={t})")));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::invalid("heat kernel points must share a positive dimension"));
    }
    let v = t - s;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-r2 / (2.0 * v)).exp() / (2.0 * PI * v).powf(x.len() as f64 / 2.0))
}

/// One-dimensional Gaussian density with variance `v`, unchecked.
#[inline]
pub(crate) fn gauss_density(v: f64, d: f64) -> f64 {
    (-d * d / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

/// Transition density of reflected Brownian motion `|B|` (method of images).
pub fn reflected_kernel(s: f64, t: f64, y: f64, z: f64) -> Result<f64> {
    if !(t > s) {
        return Err(Error::invalid(format!(
            "reflected kernel needs t > s (s={s}, t={t})"
        )));
    }
    if !(y >= 0.0 && z >= 0.0) {
        return Err(Error::invalid(format!(
            "reflected kernel needs non-negative arguments (y={y}, z={z})"
        )));
    }
    let v = t - s;
    Ok(gauss_density(v, y - z) + gauss_density(v, y + z))
}

/// `E g(Z)` for a standard normal vector of dimension `dim`, by iterated
/// adaptive quadrature on `[-M, M]^dim` with `M` the truncation multiplier.
fn gaussian_expectation(
    g: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let m = settings.truncation_radius_multiplier;
    let z = RefCell::new(vec![0.0; dim]);
    let failure: RefCell<Option<Error>> = RefCell::new(None);

    fn level(
        k: usize,
        dim: usize,
        m: f64,
        g: &dyn Fn(&[f64]) -> f64,
        z: &RefCell<Vec<f64>>,
        failure: &RefCell<Option<Error>>,
        settings: &QuadratureSettings,
    ) -> Result<f64> {
        let q = integrate(
            |u| {
                z.borrow_mut()[k] = u;
                let inner = if k + 1 == dim {
                    let zz = z.borrow();
                    g(&zz)
                } else {
                    match level(k + 1, dim, m, g, z, failure, settings) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                };
                (-0.5 * u * u).exp() / (2.0 * PI).sqrt() * inner
            },
            -m,
            m,
            settings,
        )?;
        Ok(q.value)
    }

    let v = level(0, dim, m, g, &z, &failure, settings)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `T_s f(x) = E f(x + sqrt(s) Z)`: Brownian semigroup at time `s`.
pub fn gauss_semigroup(
    f: &dyn TestFunction,
    s: f64,
    x: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("semigroup time must be >= 0, got {s}")));
    }
    if x.is_empty() {
        return Err(Error::invalid("semigroup point must have positive dimension"));
    }
    if s == 0.0 {
        return Ok(f.value(x));
    }
    let sd = s.sqrt();
    let mut y = vec![0.0; x.len()];
    let y_cell = RefCell::new(&mut y);
    gaussian_expectation(
        &|z| {
            let mut y = y_cell.borrow_mut();
            for ((yi, xi), zi) in y.iter_mut().zip(x).zip(z) {
                *yi = xi + sd * zi;
            }
            f.value(&y)
        },
        x.len(),
        settings,
    )
}

/// `E f(X^x(|B(t)|))` for Brownian outer motion, by adaptive quadrature of
/// `2 ∫ p_t(0, s) T_s f(x) ds` truncated at `M sqrt(t)`.
pub fn btp_marginal(
    f: &dyn TestFunction,
    x: &[f64],
    t: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    settings.validate()?;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("marginal needs t > 0, got {t}")));
    }
    let inner_settings = settings.with_tolerances(settings.abs_tol * 0.1, settings.rel_tol * 0.1);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let q = integrate_half_line(
        |s| {
            let w = 2.0 * gauss_density(t, s);
            if w == 0.0 {
                return 0.0;
            }
            match gauss_semigroup(f, s, x, &inner_settings) {
                Ok(v) => w * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        t.sqrt(),
        settings,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::Builtin;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heat_kernel_values() {
        let v = heat_kernel(0.0, 1.0, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert!(heat_kernel(1.0, 1.0, &[0.0], &[0.0]).is_err());
        let v2 = heat_kernel(0.0, 1.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v2, 1.0 / (2.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn heat_kernel_normalised() {
        let s = QuadratureSettings::default();
        let q = integrate(|y| heat_kernel(0.0, 1.0, &[0.0], &[y]).unwrap(), -12.0, 12.0, &s).unwrap();
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn chapman_kolmogorov() {
        let s = QuadratureSettings::default();
        let q = integrate(
            |z| {
                heat_kernel(0.0, 0.3, &[0.0], &[z]).unwrap()
                    * heat_kernel(0.3, 1.0, &[z], &[0.5]).unwrap()
            },
            -10.0,
            10.0,
            &s,
        )
        .unwrap();
        let direct = heat_kernel(0.0, 1.0, &[0.0], &[0.5]).unwrap();
        assert_abs_diff_eq!(q.value, direct, epsilon = 1e-8);
    }

    #[test]
    fn reflected_kernel_values() {
        let s = QuadratureSettings::default();
        let q = integrate(|z| reflected_kernel(0.0, 1.0, 0.7, z).unwrap(), 0.0, 12.0, &s).unwrap();
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            reflected_kernel(0.0, 1.0, 0.0, 0.0).unwrap(),
            0.797_884_560_802_865_4,
            epsilon = 1e-15
        );
        assert_eq!(
            reflected_kernel(0.0, 1.0, 0.3, 0.9).unwrap(),
            reflected_kernel(0.0, 1.0, 0.9, 0.3).unwrap()
        );
        assert!(reflected_kernel(0.0, 1.0, -0.1, 0.2).is_err());
        assert!(reflected_kernel(1.0, 0.5, 0.1, 0.2).is_err());
    }

    #[test]
    fn semigroup_moments() {
        let s = QuadratureSettings::default();
        let one = gauss_semigroup(&Builtin::Constant(1.0), 0.7, &[0.3], &s).unwrap();
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-12);
        let sq = gauss_semigroup(&Builtin::Square, 2.0, &[0.0], &s).unwrap();
        assert_abs_diff_eq!(sq, 2.0, epsilon = 1e-11);
        let cube = gauss_semigroup(&Builtin::Cube, 1.0, &[0.5], &s).unwrap();
        assert_abs_diff_eq!(cube, 1.625, epsilon = 1e-11);
        assert_eq!(gauss_semigroup(&Builtin::Cosine, 0.0, &[0.4], &s).unwrap(), 0.4f64.cos());
        // |x|^2 in two dimensions: |x|^2 + 2 s.
        let sq2 = gauss_semigroup(&Builtin::Square, 0.5, &[0.3, 0.4], &s).unwrap();
        assert_abs_diff_eq!(sq2, 0.25 + 1.0, epsilon = 1e-10);
    }

    #[test]
    fn marginal_closed_forms() {
        let s = QuadratureSettings::default();
        let m = btp_marginal(&Builtin::Constant(1.0), &[0.4], 0.8, &s).unwrap();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-10);
        let m = btp_marginal(&Builtin::Square, &[0.0], 1.0, &s).unwrap();
        assert_abs_diff_eq!(m, (2.0 / PI).sqrt(), epsilon = 1e-8);
        let m = btp_marginal(&Builtin::Cosine, &[0.3], 1e-8, &s).unwrap();
        assert_abs_diff_eq!(m, 0.3f64.cos(), epsilon = 1e-3);
        assert!(btp_marginal(&Builtin::Square, &[0.0], 0.0, &s).is_err());
    }
}
