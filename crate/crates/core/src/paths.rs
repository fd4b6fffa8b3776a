//! Discretized Brownian and diffusion sample paths.
//!
//! A [`Path`] is a [`TimeGrid`] together with one `dim`-dimensional point per
//! grid node, stored row-major in a flat buffer. Paths are total functions of
//! time through [`Path::evaluate`], which interpolates linearly between nodes.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Strictly increasing, finite time nodes starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(format!(
                "time grid must start at 0, got {}",
                times[0]
            )));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("non-finite grid time {t}")));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { times })
    }

    /// `steps + 1` equally spaced nodes on `[0, end]`.
    pub fn uniform(end: f64, steps: usize) -> Result<Self> {
        if !(end > 0.0) || !end.is_finite() || steps == 0 {
            return Err(Error::invalid(format!(
                "uniform grid needs end > 0 and steps >= 1 (end={end}, steps={steps})"
            )));
        }
        let dt = end / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        times[steps] = end;
        TimeGrid::new(times)
    }

    /// Grid made of 0 and the given non-negative times, sorted with duplicates removed.
    pub fn covering(times: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut all: Vec<f64> = std::iter::once(0.0).chain(times).collect();
        if let Some(t) = all.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::invalid(format!("covering grid got time {t}")));
        }
        all.sort_by(f64::total_cmp);
        all.dedup();
        TimeGrid::new(all)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Index of the node equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }
}

/// Sample path: one point of dimension `dim` per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    /// Build a path from a flat row-major buffer of `grid.len() * dim` values.
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::invalid(format!(
                "path has {} values, expected {} nodes x {} dims",
                values.len(),
                grid.len(),
                dim
            )));
        }
        Ok(Path { grid, dim, values })
    }

    /// One-dimensional path from scalar values.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Path::new(grid, 1, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Value at node `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat row-major value buffer.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// First coordinate at every node.
    pub fn first_coordinates(&self) -> Vec<f64> {
        self.values.iter().step_by(self.dim).copied().collect()
    }

    pub fn start(&self) -> &[f64] {
        self.value(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Path {
        Path {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Shift every value by the point `x0`.
    pub fn shifted(&self, x0: &[f64]) -> Result<Path> {
        if x0.len() != self.dim {
            return Err(Error::invalid(format!(
                "shift has dimension {}, path has {}",
                x0.len(),
                self.dim
            )));
        }
        let mut values = self.values.clone();
        for row in values.chunks_mut(self.dim) {
            for (v, s) in row.iter_mut().zip(x0) {
                *v += s;
            }
        }
        Ok(Path {
            grid: self.grid.clone(),
            dim: self.dim,
            values,
        })
    }

    /// Linear interpolation between the bracketing nodes; exact at nodes.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let times = self.grid.times();
        let end = self.grid.end();
        if !(0.0..=end).contains(&t) {
            return Err(Error::OutOfRange { t, end });
        }
        match times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => out.copy_from_slice(self.value(i)),
            Err(i) => {
                // 0 < i < len since t lies strictly inside (0, end)
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (t - t0) / (t1 - t0);
                let (a, b) = (self.value(i - 1), self.value(i));
                for ((o, &va), &vb) in out.iter_mut().zip(a).zip(b) {
                    *o = va + w * (vb - va);
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Path::evaluate`].
pub fn evaluate(path: &Path, t: f64) -> Result<Vec<f64>> {
    path.evaluate(t)
}

/// Isotropic conductivity `g` of a divergence-form generator `A f = div(g grad f)`.
pub trait Conductivity: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// `g(x) = base * (1 + amplitude * sin(x_1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineConductivity {
    pub base: f64,
    pub amplitude: f64,
}

impl Conductivity for SineConductivity {
    fn value(&self, x: &[f64]) -> f64 {
        self.base * (1.0 + self.amplitude * x[0].sin())
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[0] = self.base * self.amplitude * x[0].cos();
        g
    }
}

/// Generator of the outer Markov process.
#[derive(Debug, Clone)]
pub enum GeneratorSpec {
    /// `A = Δ/2`, standard Brownian motion.
    HalfLaplacian,
    /// `A f = div(g grad f)` with declared bounds `c <= g <= 1/c`.
    DivergenceForm {
        conductivity: Arc<dyn Conductivity>,
        ellipticity: f64,
    },
}

impl GeneratorSpec {
    pub fn divergence_form(conductivity: Arc<dyn Conductivity>, ellipticity: f64) -> Result<Self> {
        if !(ellipticity > 0.0 && ellipticity <= 1.0) {
            return Err(Error::invalid(format!(
                "ellipticity constant must lie in (0, 1], got {ellipticity}"
            )));
        }
        Ok(GeneratorSpec::DivergenceForm {
            conductivity,
            ellipticity,
        })
    }

    /// Conductivity value at `x`; `1/2` for the half-Laplacian.
    pub fn conductivity(&self, x: &[f64]) -> f64 {
        match self {
            GeneratorSpec::HalfLaplacian => 0.5,
            GeneratorSpec::DivergenceForm { conductivity, .. } => conductivity.value(x),
        }
    }

    pub fn conductivity_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            GeneratorSpec::HalfLaplacian => vec![0.0; x.len()],
            GeneratorSpec::DivergenceForm { conductivity, .. } => conductivity.gradient(x),
        }
    }

    /// Probe the declared ellipticity bounds at `probes` uniform points in `[-radius, radius]^dim`.
    pub fn check_ellipticity(
        &self,
        dim: usize,
        radius: f64,
        probes: usize,
        seed: Seed,
    ) -> Result<()> {
        let GeneratorSpec::DivergenceForm {
            conductivity,
            ellipticity,
        } = self
        else {
            return Ok(());
        };
        let mut rng = seed.rng();
        let mut x = vec![0.0; dim];
        for _ in 0..probes {
            for xi in x.iter_mut() {
                *xi = rng.random_range(-radius..=radius);
            }
            let g = conductivity.value(&x);
            if !(g >= *ellipticity && g <= 1.0 / ellipticity) {
                return Err(Error::invalid(format!(
                    "conductivity {g} at {x:?} violates bounds [{}, {}]",
                    ellipticity,
                    1.0 / ellipticity
                )));
            }
        }
        Ok(())
    }
}

/// Brownian motion from the origin: independent `N(0, Δt)` increments per coordinate.
pub fn sample_bm(grid: &TimeGrid, dim: usize, seed: Seed) -> Result<Path> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = seed.rng();
    let times = grid.times();
    let mut values = vec![0.0; times.len() * dim];
    for i in 1..times.len() {
        let sd = (times[i] - times[i - 1]).sqrt();
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[i * dim + j] = values[(i - 1) * dim + j] + sd * z;
        }
    }
    Path::new(grid.clone(), dim, values)
}

/// Insert nodes at `insert_times`, drawing each new value from the Brownian
/// bridge between its neighbours. Original nodes keep their values exactly.
///
/// The bridge law assumes unit diffusivity, i.e. a path from [`sample_bm`].
pub fn refine_bridge(path: &Path, insert_times: &[f64], seed: Seed) -> Result<Path> {
    if insert_times.is_empty() {
        return Ok(path.clone());
    }
    let times = path.times();
    let end = path.grid().end();
    let mut inserts = insert_times.to_vec();
    inserts.sort_by(f64::total_cmp);
    for w in inserts.windows(2) {
        if w[0] == w[1] {
            return Err(Error::invalid(format!("duplicate insert time {}", w[0])));
        }
    }
    for &u in &inserts {
        if !(u > 0.0 && u < end) {
            return Err(Error::OutOfRange { t: u, end });
        }
        if path.grid().index_of(u).is_some() {
            return Err(Error::invalid(format!(
                "insert time {u} coincides with an existing node"
            )));
        }
    }

    let dim = path.dim();
    let mut rng = seed.rng();
    let mut new_times = Vec::with_capacity(times.len() + inserts.len());
    let mut new_values = Vec::with_capacity((times.len() + inserts.len()) * dim);
    let mut next = inserts.iter().peekable();
    new_times.push(times[0]);
    new_values.extend_from_slice(path.value(0));
    for i in 1..times.len() {
        let (tr, vr) = (times[i], path.value(i));
        while let Some(&&u) = next.peek() {
            if u >= tr {
                break;
            }
            next.next();
            let tl = *new_times.last().unwrap();
            let base = new_values.len() - dim;
            let w = (u - tl) / (tr - tl);
            let sd = ((u - tl) * (tr - u) / (tr - tl)).sqrt();
            for j in 0..dim {
                let vl = new_values[base + j];
                let z: f64 = rng.sample(StandardNormal);
                new_values.push(vl + w * (vr[j] - vl) + sd * z);
            }
            new_times.push(u);
        }
        new_times.push(tr);
        new_values.extend_from_slice(vr);
    }
    Path::new(TimeGrid::new(new_times)?, dim, new_values)
}

/// Euler-Maruyama path of the outer diffusion started at `x0`.
///
/// For the isotropic divergence-form generator the step is
/// `x + grad g(x) Δt + sqrt(2 g(x) Δt) Z`. The half-Laplacian case is exactly
/// `sample_bm` shifted by `x0` (same seed, same values).
pub fn sample_diffusion(spec: &GeneratorSpec, x0: &[f64], grid: &TimeGrid, seed: Seed) -> Result<Path> {
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::invalid("starting point must have positive dimension"));
    }
    match spec {
        GeneratorSpec::HalfLaplacian => sample_bm(grid, dim, seed)?.shifted(x0),
        GeneratorSpec::DivergenceForm { conductivity, .. } => {
            let mut rng = seed.rng();
            let times = grid.times();
            let mut values = Vec::with_capacity(times.len() * dim);
            values.extend_from_slice(x0);
            let mut x = x0.to_vec();
            for i in 1..times.len() {
                let dt = times[i] - times[i - 1];
                let g = conductivity.value(&x);
                let grad = conductivity.gradient(&x);
                if !g.is_finite() || g < 0.0 || grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalDomain(format!(
                        "conductivity {g} / gradient {grad:?} at {x:?}"
                    )));
                }
                let sd = (2.0 * g * dt).sqrt();
                for j in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    x[j] += grad[j] * dt + sd * z;
                }
                values.extend_from_slice(&x);
            }
            Path::new(grid.clone(), dim, values)
        }
    }
}
