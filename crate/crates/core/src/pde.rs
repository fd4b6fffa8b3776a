//! Finite-difference residuals of the fourth-order parabolic equation
//!
//! ```text
//! u_t = A f / sqrt(2 pi t) + (1/2) A^2 u
//! ```
//!
//! plus closed-form exit-time moments and Dirichlet solutions on intervals
//! and balls.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::paths::GeneratorSpec;
use crate::quadrature::{integrate, QuadratureSettings};
use crate::testfn::TestFunction;

const UNIFORM_TOL: f64 = 1e-12;

/// Uniform space-time grid in one space dimension. Rows of grid functions
/// are time slices, columns are spatial nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    x_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    h: f64,
    dt: f64,
}

fn uniform_nodes(lo: f64, hi: f64, step: f64, what: &str) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && hi > lo) {
        return Err(Error::invalid(format!(
            "{what} range needs lo < hi and a positive step (lo={lo}, hi={hi}, step={step})"
        )));
    }
    let steps = ((hi - lo) / step).round();
    if ((hi - lo) - steps * step).abs() > 1e-9 * (hi - lo) {
        return Err(Error::invalid(format!(
            "{what} step {step} does not divide [{lo}, {hi}]"
        )));
    }
    let steps = steps as usize;
    Ok((0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect())
}

fn check_uniform(nodes: &[f64], what: &str) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::invalid(format!("{what} grid needs at least two nodes")));
    }
    let step = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::invalid(format!("{what} nodes must increase")));
    }
    for w in nodes.windows(2) {
        if ((w[1] - w[0]) - step).abs() > UNIFORM_TOL.max(step * 1e-9) {
            return Err(Error::invalid(format!("{what} nodes are not uniformly spaced")));
        }
    }
    Ok(step)
}

impl SpaceTimeGrid {
    /// Grid `x in [x_lo, x_hi]` step `h`, `t in [t_lo, t_hi]` step `dt`.
    pub fn new(x_lo: f64, x_hi: f64, h: f64, t_lo: f64, t_hi: f64, dt: f64) -> Result<Self> {
        let x = uniform_nodes(x_lo, x_hi, h, "space")?;
        let t = uniform_nodes(t_lo, t_hi, dt, "time")?;
        Self::from_nodes(x, t)
    }

    pub fn from_nodes(x_nodes: Vec<f64>, t_nodes: Vec<f64>) -> Result<Self> {
        let h = check_uniform(&x_nodes, "space")?;
        let dt = check_uniform(&t_nodes, "time")?;
        if !(t_nodes[0] > 0.0) {
            return Err(Error::invalid(format!(
                "time nodes must be positive (source is singular at 0), first is {}",
                t_nodes[0]
            )));
        }
        Ok(SpaceTimeGrid {
            x_nodes,
            t_nodes,
            h,
            dt,
        })
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Tabulate `u(t, x)`; rows are times.
    pub fn tabulate(&self, mut u: impl FnMut(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.t_nodes.len(), self.x_nodes.len()), |(i, j)| {
            u(self.t_nodes[i], self.x_nodes[j])
        })
    }

    /// Like [`tabulate`](Self::tabulate) for fallible evaluators.
    pub fn try_tabulate(&self, mut u: impl FnMut(f64, f64) -> Result<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.t_nodes.len(), self.x_nodes.len()));
        for (i, &t) in self.t_nodes.iter().enumerate() {
            for (j, &x) in self.x_nodes.iter().enumerate() {
                out[[i, j]] = u(t, x)?;
            }
        }
        Ok(out)
    }
}

/// Bounded domains with closed-form exit moments.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!("interval needs a < b, got ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball dimension must be >= 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Domain::Ball { center, radius })
    }

    /// Ball of radius `r` centred at the origin of `R^d`.
    pub fn centered_ball(radius: f64, dim: usize) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Centre and radius; an interval is the one-dimensional ball.
    pub fn center_radius(&self) -> (Vec<f64>, f64) {
        match self {
            Domain::Interval { a, b } => (vec![0.5 * (a + b)], 0.5 * (b - a)),
            Domain::Ball { center, radius } => (center.clone(), *radius),
        }
    }

    /// `radius - |x - center|`: positive inside, zero on the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Ball { center, radius } => radius - norm_from(x, center),
        }
    }

    pub fn contains_closure(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.boundary_distance(x) >= -tol
    }

    /// Nearest boundary point (radial projection; the nearer endpoint in 1D).
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Interval { a, b } => {
                if x[0] - a <= b - x[0] {
                    vec![*a]
                } else {
                    vec![*b]
                }
            }
            Domain::Ball { center, radius } => {
                let r = norm_from(x, center);
                if r == 0.0 {
                    let mut p = center.clone();
                    p[0] += radius;
                    return p;
                }
                x.iter()
                    .zip(center)
                    .map(|(xi, ci)| ci + (xi - ci) * radius / r)
                    .collect()
            }
        }
    }

    /// Parse `interval:a,b` or `ball:r,d` (ball centred at the origin).
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("domain '{spec}' must look like interval:a,b or ball:r,d")))?;
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::invalid(format!("domain '{spec}' needs two parameters")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("domain '{spec}': '{s}' is not a number")))
        };
        match kind.trim() {
            "interval" => Self::interval(num(parts[0])?, num(parts[1])?),
            "ball" => {
                let d: usize = parts[1]
                    .parse()
                    .map_err(|_| Error::invalid(format!("domain '{spec}': dimension must be an integer")))?;
                Self::centered_ball(num(parts[0])?, d)
            }
            other => Err(Error::invalid(format!("unknown domain shape '{other}'"))),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Interval { a, b } => write!(f, "interval:{a},{b}"),
            Domain::Ball { center, radius } if center.iter().all(|c| *c == 0.0) => {
                write!(f, "ball:{radius},{}", center.len())
            }
            Domain::Ball { center, radius } => write!(f, "ball:{radius},{} at {center:?}", center.len()),
        }
    }
}

fn norm_from(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Discrete bi-Laplacian of a 1D grid function at nodes `2..n-2`.
pub fn bilaplacian_fd_1d(u: &[f64], h: f64) -> Result<Vec<f64>> {
    if u.len() < 5 {
        return Err(Error::invalid(format!(
            "1D bi-Laplacian stencil needs >= 5 nodes, got {}",
            u.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let h4 = h.powi(4);
    Ok(u
        .windows(5)
        .map(|w| {
            let c = w[2];
            ((w[0] - c) - 4.0 * (w[1] - c) - 4.0 * (w[3] - c) + (w[4] - c)) / h4
        })
        .collect())
}

/// Discrete bi-Laplacian of a 2D grid function (13-point stencil) at nodes
/// with full stencil support; output has shape `(nx - 4, ny - 4)`.
pub fn bilaplacian_fd_2d(u: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
    let (nx, ny) = u.dim();
    if nx < 5 || ny < 5 {
        return Err(Error::invalid(format!(
            "2D bi-Laplacian stencil needs >= 5 nodes per axis, got {nx}x{ny}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let h4 = h.powi(4);
    Ok(Array2::from_shape_fn((nx - 4, ny - 4), |(a, b)| {
        let (i, j) = (a + 2, b + 2);
        let c = u[[i, j]];
        let d = |di: isize, dj: isize| u[[(i as isize + di) as usize, (j as isize + dj) as usize]] - c;
        let near = d(1, 0) + d(-1, 0) + d(0, 1) + d(0, -1);
        let diag = d(1, 1) + d(1, -1) + d(-1, 1) + d(-1, -1);
        let far = d(2, 0) + d(-2, 0) + d(0, 2) + d(0, -2);
        (-8.0 * near + 2.0 * diag + far) / h4
    }))
}

/// Discrete bi-Laplacian of a pointwise function at `x`:
/// `sum_i δ⁴_i u + 2 sum_{i<j} δ²_i δ²_j u` over `h⁴`, which is the 5-point
/// stencil in 1D and the 13-point stencil in 2D.
pub fn bilaplacian_at(u: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<f64> {
    if x.is_empty() || !(h > 0.0) {
        return Err(Error::invalid("bi-Laplacian probe needs a point and a positive step"));
    }
    let d = x.len();
    let c = u(x);
    let mut y = x.to_vec();
    let mut at = |offsets: &[(usize, f64)]| {
        y.copy_from_slice(x);
        for &(i, k) in offsets {
            y[i] += k * h;
        }
        u(&y) - c
    };
    let mut total = 0.0;
    for i in 0..d {
        total += at(&[(i, -2.0)]) - 4.0 * at(&[(i, -1.0)]) - 4.0 * at(&[(i, 1.0)]) + at(&[(i, 2.0)]);
        for j in i + 1..d {
            let mixed = at(&[(i, 1.0), (j, 1.0)]) + at(&[(i, 1.0), (j, -1.0)])
                + at(&[(i, -1.0), (j, 1.0)])
                + at(&[(i, -1.0), (j, -1.0)])
                - 2.0 * (at(&[(i, 1.0)]) + at(&[(i, -1.0)]) + at(&[(j, 1.0)]) + at(&[(j, -1.0)]));
            total += 2.0 * mixed;
        }
    }
    Ok(total / h.powi(4))
}

/// Central first-derivative weights for offsets `-m..=m`, accuracy order `2m`.
fn central_weights(order: usize) -> Result<&'static [f64]> {
    Ok(match order {
        2 => &[-0.5, 0.0, 0.5],
        4 => &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
        6 => &[-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0],
        8 => &[
            1.0 / 280.0,
            -4.0 / 105.0,
            0.2,
            -0.8,
            0.0,
            0.8,
            -0.2,
            4.0 / 105.0,
            -1.0 / 280.0,
        ],
        _ => {
            return Err(Error::invalid(format!(
                "time derivative order must be 2, 4, 6 or 8, got {order}"
            )))
        }
    })
}

/// Residual of `u_t = A f / sqrt(2 pi t) + (1/2) A^2 u` on the interior
/// nodes of a grid function.
#[derive(Debug, Clone)]
pub struct Residual {
    /// Rows follow `t_nodes`, columns follow `x_nodes`.
    pub values: Array2<f64>,
    pub t_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Residual at the node nearest `(t, x)`, if within half a step.
    pub fn at(&self, t: f64, x: f64) -> Option<f64> {
        let i = nearest(&self.t_nodes, t)?;
        let j = nearest(&self.x_nodes, x)?;
        Some(self.values[[i, j]])
    }
}

fn nearest(nodes: &[f64], v: f64) -> Option<usize> {
    if nodes.len() < 2 {
        return nodes.first().filter(|n| (*n - v).abs() < 1e-9).map(|_| 0);
    }
    let step = nodes[1] - nodes[0];
    let k = ((v - nodes[0]) / step).round();
    if k < 0.0 || k as usize >= nodes.len() {
        return None;
    }
    let k = k as usize;
    ((nodes[k] - v).abs() <= 1e-6 * step).then_some(k)
}

/// Options for [`parabolic_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualOptions {
    /// Accuracy order of the central time difference (2, 4, 6 or 8).
    pub time_order: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions { time_order: 2 }
    }
}

/// Evaluate `R = u_t - A f / sqrt(2 pi t) - (1/2) A^2 u` for a 1D outer
/// generator. `A f` uses the exact derivatives of `f`; `u_t` and `A^2 u`
/// use central differences on the grid.
pub fn parabolic_residual(
    u: &Array2<f64>,
    grid: &SpaceTimeGrid,
    f: &dyn TestFunction,
    spec: &GeneratorSpec,
    options: ResidualOptions,
) -> Result<Residual> {
    let (nt, nx) = u.dim();
    if nt != grid.t_nodes.len() || nx != grid.x_nodes.len() {
        return Err(Error::invalid(format!(
            "grid function shape {nt}x{nx} does not match grid {}x{}",
            grid.t_nodes.len(),
            grid.x_nodes.len()
        )));
    }
    let w = central_weights(options.time_order)?;
    let m = w.len() / 2;
    if nt < 2 * m + 1 || nx < 5 {
        return Err(Error::invalid(format!(
            "grid {nt}x{nx} too coarse for the stencils (need >= {} times and >= 5 positions)",
            2 * m + 1
        )));
    }
    let (h, dt) = (grid.h, grid.dt);
    let xs = &grid.x_nodes;
    let out_t: Vec<f64> = grid.t_nodes[m..nt - m].to_vec();
    let out_x: Vec<f64> = xs[2..nx - 2].to_vec();

    // A f at the output positions (time independent).
    let af: Vec<f64> = out_x.iter().map(|&x| apply_generator_exact(spec, f, x)).collect();

    let mut values = Array2::zeros((out_t.len(), out_x.len()));
    for (a, &t) in out_t.iter().enumerate() {
        let i = a + m;
        let row: Vec<f64> = u.row(i).to_vec();
        let a2u = generator_squared_fd(spec, &row, xs, h)?;
        let source = 1.0 / (2.0 * PI * t).sqrt();
        for (b, _) in out_x.iter().enumerate() {
            let j = b + 2;
            let ut: f64 = w
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| c * (u[[i + k - m, j]] - u[[i, j]]))
                .sum::<f64>()
                / dt;
            values[[a, b]] = ut - af[b] * source - 0.5 * a2u[b];
        }
    }
    Ok(Residual {
        values,
        t_nodes: out_t,
        x_nodes: out_x,
    })
}

fn apply_generator_exact(spec: &GeneratorSpec, f: &dyn TestFunction, x: f64) -> f64 {
    let p = [x];
    match spec {
        GeneratorSpec::HalfLaplacian => 0.5 * f.laplacian(&p),
        GeneratorSpec::DivergenceForm { .. } => {
            let g = spec.conductivity(&p);
            let dg = spec.conductivity_gradient(&p)[0];
            g * f.laplacian(&p) + dg * f.gradient(&p)[0]
        }
    }
}

/// `A^2 u` at nodes `2..n-2` of a spatial row.
fn generator_squared_fd(spec: &GeneratorSpec, row: &[f64], xs: &[f64], h: f64) -> Result<Vec<f64>> {
    match spec {
        GeneratorSpec::HalfLaplacian => {
            Ok(bilaplacian_fd_1d(row, h)?.into_iter().map(|v| 0.25 * v).collect())
        }
        GeneratorSpec::DivergenceForm { .. } => {
            // (g u')' in conservative form, applied twice.
            let n = row.len();
            let g_half: Vec<f64> = (0..n - 1)
                .map(|j| spec.conductivity(&[0.5 * (xs[j] + xs[j + 1])]))
                .collect();
            let apply = |v: &[f64], lo: usize, hi: usize| -> Vec<f64> {
                (lo..hi)
                    .map(|j| {
                        (g_half[j] * (v[j + 1] - v[j]) - g_half[j - 1] * (v[j] - v[j - 1])) / (h * h)
                    })
                    .collect()
            };
            let mut first = vec![0.0; n];
            first[1..n - 1].copy_from_slice(&apply(row, 1, n - 1));
            Ok(apply(&first, 2, n - 2))
        }
    }
}

/// Exit-time moments `m1(x) = E tau`, `m2(x) = E tau^2` of Brownian motion
/// from a ball (an interval being the 1D ball), from the nested Poisson
/// problems `(1/2) Δ m1 = -1`, `(1/2) Δ m2 = -2 m1`, zero boundary values.
///
/// With `ρ = |x - c|`, radius `r` and dimension `d`:
/// `m1 = (r² - ρ²)/d`, `m2 = r⁴(d+4)/(d²(d+2)) - 2r²ρ²/d² + ρ⁴/(d(d+2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitMoments {
    domain: Domain,
    center: Vec<f64>,
    radius: f64,
}

pub fn solve_exit_moments(domain: &Domain) -> Result<ExitMoments> {
    let (center, radius) = domain.center_radius();
    Ok(ExitMoments {
        domain: domain.clone(),
        center,
        radius,
    })
}

impl ExitMoments {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    fn rho2(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum()
    }

    fn d(&self) -> f64 {
        self.center.len() as f64
    }

    /// Zero outside the closed domain.
    pub fn m1(&self, x: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        ((r2 - self.rho2(x)) / self.d()).max(0.0)
    }

    pub fn m2(&self, x: &[f64]) -> f64 {
        let rho2 = self.rho2(x);
        let r2 = self.radius * self.radius;
        if rho2 >= r2 {
            return 0.0;
        }
        self.m2_polynomial(x)
    }

    /// The polynomial formula for `m2`, without clipping outside the domain.
    pub fn m2_polynomial(&self, x: &[f64]) -> f64 {
        let d = self.d();
        let rho2 = self.rho2(x);
        let r2 = self.radius * self.radius;
        r2 * r2 * (d + 4.0) / (d * d * (d + 2.0)) - 2.0 * r2 * rho2 / (d * d)
            + rho2 * rho2 / (d * (d + 2.0))
    }

    fn radial_coefficient(&self, x: &[f64]) -> f64 {
        let d = self.d();
        let r2 = self.radius * self.radius;
        -4.0 * r2 / (d * d) + 4.0 * self.rho2(x) / (d * (d + 2.0))
    }

    pub fn m2_gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = self.radial_coefficient(x);
        x.iter().zip(&self.center).map(|(a, o)| c * (a - o)).collect()
    }

    /// Row-major Hessian of `m2`.
    pub fn m2_hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.center.len();
        let d = self.d();
        let c = self.radial_coefficient(x);
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, o)| a - o).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = 8.0 * y[i] * y[j] / (d * (d + 2.0)) + if i == j { c } else { 0.0 };
            }
        }
        hess
    }

    /// `Δ m2 = -4 m1`.
    pub fn m2_laplacian(&self, x: &[f64]) -> f64 {
        let d = self.d();
        -4.0 * (self.radius * self.radius - self.rho2(x)) / d
    }

    /// `∇Δ m2 = 8 (x - c) / d`.
    pub fn m2_grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d();
        x.iter().zip(&self.center).map(|(a, o)| 8.0 * (a - o) / d).collect()
    }

    /// `Δ² m2`, identically 8.
    pub fn m2_bilaplacian(&self) -> f64 {
        8.0
    }
}

/// Harmonic extension of boundary data into an interval or a ball of
/// dimension 2 or 3.
#[derive(Clone)]
pub struct DirichletSolution {
    domain: Domain,
    data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    settings: QuadratureSettings,
}

impl std::fmt::Debug for DirichletSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSolution")
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

pub fn dirichlet_solution(
    domain: &Domain,
    data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
) -> Result<DirichletSolution> {
    match domain {
        Domain::Interval { .. } => {}
        Domain::Ball { center, .. } if (1..=3).contains(&center.len()) => {}
        Domain::Ball { center, .. } => {
            return Err(Error::invalid(format!(
                "Dirichlet solution supports balls of dimension 1 to 3, got {}",
                center.len()
            )))
        }
    }
    Ok(DirichletSolution {
        domain: domain.clone(),
        data,
        settings: QuadratureSettings::default().with_tolerances(1e-11, 1e-11),
    })
}

impl DirichletSolution {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Boundary data at a boundary point.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        (self.data)(x)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.domain.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, domain has {}",
                x.len(),
                self.domain.dim()
            )));
        }
        let dist = self.domain.boundary_distance(x);
        if dist < 0.0 {
            return Err(Error::invalid(format!("point {x:?} lies outside the domain")));
        }
        let (center, r) = self.domain.center_radius();
        if dist <= 1e-14 * r {
            return Ok((self.data)(&self.domain.project_to_boundary(x)));
        }
        match center.len() {
            1 => {
                let (lo, hi) = (center[0] - r, center[0] + r);
                let (fl, fh) = ((self.data)(&[lo]), (self.data)(&[hi]));
                Ok(fl + (fh - fl) * (x[0] - lo) / (hi - lo))
            }
            2 => self.poisson_disk(x, &center, r),
            3 => self.poisson_sphere(x, &center, r),
            _ => unreachable!("dimension checked at construction"),
        }
    }

    fn poisson_disk(&self, x: &[f64], c: &[f64], r: f64) -> Result<f64> {
        let y = [x[0] - c[0], x[1] - c[1]];
        let num = r * r - (y[0] * y[0] + y[1] * y[1]);
        let q = integrate(
            |th| {
                let (s, co) = th.sin_cos();
                let z = [r * co, r * s];
                let dist2 = (y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2);
                num / dist2 * (self.data)(&[c[0] + z[0], c[1] + z[1]])
            },
            0.0,
            2.0 * PI,
            &self.settings,
        )?;
        Ok(q.value / (2.0 * PI))
    }

    fn poisson_sphere(&self, x: &[f64], c: &[f64], r: f64) -> Result<f64> {
        let y = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        let num = r * r - (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
        let inner_settings = self.settings.with_tolerances(self.settings.abs_tol * 0.1, self.settings.rel_tol);
        let mut failure = None;
        let q = integrate(
            |phi| {
                let (sp, cp) = phi.sin_cos();
                let inner = integrate(
                    |th| {
                        let (st, ct) = th.sin_cos();
                        let z = [r * sp * ct, r * sp * st, r * cp];
                        let dist2: f64 = (0..3).map(|k| (y[k] - z[k]).powi(2)).sum();
                        num / (dist2 * dist2.sqrt()) * (self.data)(&[c[0] + z[0], c[1] + z[1], c[2] + z[2]])
                    },
                    0.0,
                    2.0 * PI,
                    &inner_settings,
                );
                match inner {
                    Ok(v) => v.value * r * r * sp,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            PI,
            &self.settings,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(q.value / (4.0 * PI * r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::Builtin;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stencil_exact_on_quartics() {
        let h = 0.1;
        let u: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(4)).collect();
        for v in bilaplacian_fd_1d(&u, h).unwrap() {
            assert_abs_diff_eq!(v, 24.0, epsilon = 1e-9);
        }
        let q: Vec<f64> = (0..11).map(|i| 3.0 * (i as f64 * h).powi(2) - 1.0).collect();
        for v in bilaplacian_fd_1d(&q, h).unwrap() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
        assert!(bilaplacian_fd_1d(&[1.0; 4], h).is_err());
    }

    #[test]
    fn stencil_2d_on_polynomials() {
        let h = 0.1;
        // Δ²(x⁴ + 2x²y² + y⁴) = 24 + 16 + 24 = 64.
        let u = Array2::from_shape_fn((9, 9), |(i, j)| {
            let (x, y) = (i as f64 * h - 0.4, j as f64 * h - 0.4);
            (x * x + y * y).powi(2)
        });
        let b = bilaplacian_fd_2d(&u, h).unwrap();
        assert_eq!(b.dim(), (5, 5));
        for v in b.iter() {
            assert_abs_diff_eq!(*v, 64.0, epsilon = 1e-8);
        }
        assert!(bilaplacian_fd_2d(&Array2::zeros((4, 9)), h).is_err());
        let direct = bilaplacian_at(|p: &[f64]| (p[0] * p[0] + p[1] * p[1]).powi(2), &[0.1, -0.2], h).unwrap();
        assert_abs_diff_eq!(direct, 64.0, epsilon = 1e-8);
        let cube = bilaplacian_at(|p: &[f64]| p[0].powi(3) * p[1] + p[2].powi(4), &[0.3, 0.2, -0.1], 0.05).unwrap();
        assert_abs_diff_eq!(cube, 24.0, epsilon = 1e-7);
    }

    #[test]
    fn exit_moments_closed_forms() {
        let m = solve_exit_moments(&Domain::interval(-1.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(m.m1(&[0.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m2(&[0.0]), 5.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.m1(&[1.0]), 0.0);
        assert_eq!(m.m2(&[-1.0]), 0.0);
        let disk = solve_exit_moments(&Domain::centered_ball(1.0, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(disk.m2(&[0.0, 0.0]), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(disk.m2(&[0.6, 0.8]), 0.0, epsilon = 1e-15);
        // Shifted interval.
        let m = solve_exit_moments(&Domain::interval(1.0, 5.0).unwrap()).unwrap();
        assert_abs_diff_eq!(m.m1(&[3.0]), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.m2(&[3.0]), 5.0 * 16.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exit_moment_derivatives_match_differences() {
        let m = solve_exit_moments(&Domain::centered_ball(1.3, 3).unwrap()).unwrap();
        let x = [0.2, -0.3, 0.5];
        let e = 1e-5;
        let g = m.m2_gradient(&x);
        let hess = m.m2_hessian(&x);
        for i in 0..3 {
            let mut p = x;
            let mut q = x;
            p[i] += e;
            q[i] -= e;
            assert_abs_diff_eq!(g[i], (m.m2(&p) - m.m2(&q)) / (2.0 * e), epsilon = 1e-8);
            let gp = m.m2_gradient(&p);
            let gq = m.m2_gradient(&q);
            for j in 0..3 {
                assert_abs_diff_eq!(hess[j * 3 + i], (gp[j] - gq[j]) / (2.0 * e), epsilon = 1e-8);
            }
        }
        let lap: f64 = (0..3).map(|i| hess[i * 3 + i]).sum();
        assert_abs_diff_eq!(lap, m.m2_laplacian(&x), epsilon = 1e-12);
        assert_abs_diff_eq!(lap, -4.0 * m.m1(&x), epsilon = 1e-12);
    }

    #[test]
    fn dirichlet_interval_and_disk() {
        let iv = Domain::interval(-1.0, 1.0).unwrap();
        let sol = dirichlet_solution(&iv, Arc::new(|x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 })).unwrap();
        assert_abs_diff_eq!(sol.value(&[0.0]).unwrap(), 0.5, epsilon = 1e-15);
        let disk = Domain::centered_ball(1.0, 2).unwrap();
        let f = Builtin::Harmonic2d;
        let sol = dirichlet_solution(&disk, Arc::new(move |x: &[f64]| f.value(x))).unwrap();
        for p in [[0.3, 0.0], [0.1, -0.7], [-0.5, 0.5], [0.0, 0.99]] {
            assert_abs_diff_eq!(sol.value(&p).unwrap(), f.value(&p), epsilon = 1e-9);
        }
        let c = dirichlet_solution(&disk, Arc::new(|_: &[f64]| 2.5)).unwrap();
        assert_abs_diff_eq!(c.value(&[0.2, 0.3]).unwrap(), 2.5, epsilon = 1e-10);
        assert!(sol.value(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn dirichlet_ball3() {
        let ball = Domain::centered_ball(1.0, 3).unwrap();
        let sol = dirichlet_solution(&ball, Arc::new(|x: &[f64]| x[0] * x[1] + x[2])).unwrap();
        let p = [0.2, -0.4, 0.3];
        assert_abs_diff_eq!(sol.value(&p).unwrap(), 0.2 * -0.4 + 0.3, epsilon = 1e-8);
        assert!(dirichlet_solution(&Domain::centered_ball(1.0, 4).unwrap(), Arc::new(|_: &[f64]| 0.0)).is_err());
    }

    #[test]
    fn residual_vanishes_for_constant() {
        let grid = SpaceTimeGrid::new(-1.0, 1.0, 0.1, 0.1, 1.0, 0.1).unwrap();
        let u = grid.tabulate(|_, _| 3.0);
        let r = parabolic_residual(&u, &grid, &Builtin::Constant(0.0), &GeneratorSpec::HalfLaplacian, ResidualOptions::default())
            .unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceTimeGrid::new(-1.0, 1.0, 0.1, 0.0, 1.0, 0.1).is_err());
        assert!(SpaceTimeGrid::from_nodes(vec![0.0, 0.1, 0.3], vec![0.1, 0.2]).is_err());
        let g = SpaceTimeGrid::new(-2.0, 2.0, 0.01, 0.1, 1.0, 0.01).unwrap();
        assert_eq!(g.x_nodes().len(), 401);
        assert_eq!(g.t_nodes().len(), 91);
    }

    #[test]
    fn domain_parsing() {
        assert_eq!(Domain::parse("interval:-1,1").unwrap(), Domain::Interval { a: -1.0, b: 1.0 });
        assert_eq!(Domain::parse("ball:1,2").unwrap(), Domain::centered_ball(1.0, 2).unwrap());
        assert!(Domain::parse("square:1,2").is_err());
        assert!(Domain::parse("interval:1,-1").is_err());
        assert_eq!(Domain::parse("ball:1,2").unwrap().to_string(), "ball:1,2");
    }
}
