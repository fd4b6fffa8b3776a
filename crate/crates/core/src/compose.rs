//! Brownian-time paths: an outer process read at the reflected inner clock.
//!
//! * BTP: one outer path, `X(|B(t)|)`.
//! * kEBTP: `k` independent outer copies; every excursion of `|B|` away from
//!   zero reads from a copy chosen uniformly at random.
//! * EBTP: a fresh outer copy on every excursion.
//!
//! Excursions are resolved on the inner grid: a maximal run of nodes on which
//! the unreflected inner value keeps a constant nonzero sign. Nodes where the
//! inner value is exactly zero belong to no excursion and take the common
//! starting point of the outer copies. Zeros of `B` between two nodes of the
//! same sign are not detected; this is a grid-resolution bias.

use rand::Rng;

use crate::error::{Error, Result};
use crate::paths::{sample_bm, sample_diffusion, GeneratorSpec, Path, TimeGrid};
use crate::rng::Seed;

/// A maximal run of inner-grid nodes with constant nonzero sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Excursion {
    /// First node index (inclusive).
    pub start: usize,
    /// Last node index (inclusive).
    pub end: usize,
    /// Index of the outer copy read on this excursion.
    pub label: usize,
    /// Sign of the unreflected inner value, `1` or `-1`.
    pub sign: i8,
}

impl Excursion {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionDecomposition {
    pub intervals: Vec<Excursion>,
    pub source_grid: TimeGrid,
}

impl ExcursionDecomposition {
    /// Excursion containing node `index`, if the inner value there is nonzero.
    pub fn excursion_at(&self, index: usize) -> Option<&Excursion> {
        let pos = self.intervals.partition_point(|e| e.end < index);
        self.intervals.get(pos).filter(|e| e.contains(index))
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// A composed path together with its excursion bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPath {
    pub path: Path,
    /// Maximum of the reflected inner clock.
    pub inner_max: f64,
    pub decomposition: ExcursionDecomposition,
}

fn require_scalar(path: &Path, what: &str) -> Result<()> {
    if path.dim() != 1 {
        return Err(Error::invalid(format!(
            "{what} must be one-dimensional, got dim {}",
            path.dim()
        )));
    }
    Ok(())
}

/// Pointwise absolute value of a one-dimensional path.
pub fn reflect(path: &Path) -> Result<Path> {
    require_scalar(path, "reflected path")?;
    Ok(path.map_values(f64::abs))
}

/// Split the inner grid into maximal constant-sign runs. Labels start at 0.
pub fn excursions(inner_unreflected: &Path) -> Result<ExcursionDecomposition> {
    require_scalar(inner_unreflected, "inner path")?;
    let values = inner_unreflected.raw_values();
    let mut intervals = Vec::new();
    let mut current: Option<(usize, i8)> = None;
    for (i, &v) in values.iter().enumerate() {
        let sign = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        match current {
            Some((_, s)) if s == sign => {}
            Some((start, s)) => {
                intervals.push(Excursion {
                    start,
                    end: i - 1,
                    label: 0,
                    sign: s,
                });
                current = (sign != 0).then_some((i, sign));
            }
            None => current = (sign != 0).then_some((i, sign)),
        }
    }
    if let Some((start, s)) = current {
        intervals.push(Excursion {
            start,
            end: values.len() - 1,
            label: 0,
            sign: s,
        });
    }
    Ok(ExcursionDecomposition {
        intervals,
        source_grid: inner_unreflected.grid().clone(),
    })
}

fn inner_max(inner: &Path) -> f64 {
    inner.raw_values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_coverage(outer: &Path, required: f64) -> Result<()> {
    let covered = outer.grid().end();
    if covered < required {
        return Err(Error::Coverage { required, covered });
    }
    Ok(())
}

/// `X(|B(t)|)` on the inner grid.
pub fn compose_btp(inner: &Path, outer: &Path) -> Result<ComposedPath> {
    require_scalar(inner, "inner path")?;
    let max = inner_max(inner);
    check_coverage(outer, max)?;
    let dim = outer.dim();
    let mut values = vec![0.0; inner.len() * dim];
    for (i, row) in values.chunks_mut(dim).enumerate() {
        outer.evaluate_into(inner.value(i)[0].abs(), row)?;
    }
    Ok(ComposedPath {
        path: Path::new(inner.grid().clone(), dim, values)?,
        inner_max: max,
        decomposition: excursions(inner)?,
    })
}

/// Uniform copy labels in `0..k`, one per excursion, drawn from
/// `seed.derive(ordinal)` so that each choice depends only on its ordinal.
pub fn assign_labels(decomposition: &mut ExcursionDecomposition, k: usize, seed: Seed) {
    for (ordinal, e) in decomposition.intervals.iter_mut().enumerate() {
        e.label = if k == 1 {
            0
        } else {
            seed.derive(ordinal as u64).rng().random_range(0..k)
        };
    }
}

fn check_common_start(outers: &[Path]) -> Result<()> {
    let first = outers[0].start();
    for (j, o) in outers.iter().enumerate().skip(1) {
        if o.dim() != outers[0].dim() {
            return Err(Error::invalid(format!(
                "outer copy {j} has dim {}, copy 0 has dim {}",
                o.dim(),
                outers[0].dim()
            )));
        }
        if o.start() != first {
            return Err(Error::invalid(format!(
                "outer copy {j} starts at {:?}, copy 0 at {first:?}",
                o.start()
            )));
        }
    }
    Ok(())
}

/// kEBTP: each excursion reads from one of `outers`, chosen uniformly.
pub fn compose_kebtp(inner: &Path, outers: &[Path], seed: Seed) -> Result<ComposedPath> {
    require_scalar(inner, "inner path")?;
    if outers.is_empty() {
        return Err(Error::invalid("kEBTP needs at least one outer copy"));
    }
    check_common_start(outers)?;
    let max = inner_max(inner);
    for o in outers {
        check_coverage(o, max)?;
    }
    let mut decomposition = excursions(inner)?;
    assign_labels(&mut decomposition, outers.len(), seed);
    let dim = outers[0].dim();
    let mut values = Vec::with_capacity(inner.len() * dim);
    for _ in 0..inner.len() {
        values.extend_from_slice(outers[0].start());
    }
    for e in &decomposition.intervals {
        let outer = &outers[e.label];
        for i in e.start..=e.end {
            outer.evaluate_into(inner.value(i)[0].abs(), &mut values[i * dim..(i + 1) * dim])?;
        }
    }
    Ok(ComposedPath {
        path: Path::new(inner.grid().clone(), dim, values)?,
        inner_max: max,
        decomposition,
    })
}

/// What an EBTP copy factory is asked to produce.
#[derive(Debug, Clone, Copy)]
pub struct OuterRequest<'a> {
    /// Position of the excursion in the decomposition.
    pub ordinal: usize,
    /// The copy must cover `[0, horizon]`.
    pub horizon: f64,
    /// Reflected inner values at which the copy will be read.
    pub times: &'a [f64],
    pub seed: Seed,
}

/// EBTP: a fresh outer copy for every excursion, drawn by `factory` with
/// seed `seed.derive(ordinal)`. Labels equal excursion ordinals.
pub fn compose_ebtp<F>(
    inner: &Path,
    start: &[f64],
    mut factory: F,
    seed: Seed,
) -> Result<ComposedPath>
where
    F: FnMut(&OuterRequest<'_>) -> Result<Path>,
{
    require_scalar(inner, "inner path")?;
    let max = inner_max(inner);
    let mut decomposition = excursions(inner)?;
    let dim = start.len();
    let mut values = Vec::with_capacity(inner.len() * dim);
    for _ in 0..inner.len() {
        values.extend_from_slice(start);
    }
    let mut times = Vec::new();
    for (ordinal, e) in decomposition.intervals.iter_mut().enumerate() {
        e.label = ordinal;
        times.clear();
        times.extend((e.start..=e.end).map(|i| inner.value(i)[0].abs()));
        let horizon = times.iter().fold(0.0f64, |m, &v| m.max(v));
        let copy = factory(&OuterRequest {
            ordinal,
            horizon,
            times: &times,
            seed: seed.derive(ordinal as u64),
        })?;
        if copy.dim() != dim || copy.start() != start {
            return Err(Error::invalid(format!(
                "factory copy for excursion {ordinal} does not start at {start:?}"
            )));
        }
        check_coverage(&copy, horizon)?;
        for (i, &t) in (e.start..=e.end).zip(&times) {
            copy.evaluate_into(t, &mut values[i * dim..(i + 1) * dim])?;
        }
    }
    Ok(ComposedPath {
        path: Path::new(inner.grid().clone(), dim, values)?,
        inner_max: max,
        decomposition,
    })
}

/// How outer copies are sampled by [`BtpSampler`].
#[derive(Debug, Clone)]
pub enum OuterModel {
    /// Brownian motion sampled exactly at the clock values it is read at.
    Brownian,
    /// Euler-Maruyama on a uniform grid of the given step, read by linear interpolation.
    Diffusion { spec: GeneratorSpec, step: f64 },
}

impl OuterModel {
    /// A copy started at `x0` covering `[0, horizon]` and every time in `times`.
    pub fn sample(&self, x0: &[f64], times: &[f64], horizon: f64, seed: Seed) -> Result<Path> {
        match self {
            OuterModel::Brownian => {
                let grid = TimeGrid::covering(times.iter().copied().chain([horizon]))?;
                sample_bm(&grid, x0.len(), seed)?.shifted(x0)
            }
            OuterModel::Diffusion { spec, step } => {
                if !(*step > 0.0) {
                    return Err(Error::invalid("diffusion step must be positive"));
                }
                let grid = if horizon > 0.0 {
                    let steps = (horizon / step).ceil().max(1.0) as usize;
                    TimeGrid::uniform(steps as f64 * step, steps)?
                } else {
                    TimeGrid::new(vec![0.0])?
                };
                sample_diffusion(spec, x0, &grid, seed)
            }
        }
    }
}

/// Seeded sampler of BTP / kEBTP / EBTP paths on a fixed inner grid.
///
/// Seed layout per call: `seed.derive(0)` drives the inner Brownian motion,
/// `seed.derive(1)` the excursion labels or EBTP copies, and
/// `seed.derive(2).derive(j)` the `j`-th kEBTP/BTP copy.
#[derive(Debug, Clone)]
pub struct BtpSampler {
    pub start: Vec<f64>,
    pub grid: TimeGrid,
    pub outer: OuterModel,
}

impl BtpSampler {
    pub fn brownian(start: Vec<f64>, grid: TimeGrid) -> Self {
        BtpSampler {
            start,
            grid,
            outer: OuterModel::Brownian,
        }
    }

    pub fn inner(&self, seed: Seed) -> Result<Path> {
        sample_bm(&self.grid, 1, seed.derive(0))
    }

    pub fn btp(&self, seed: Seed) -> Result<ComposedPath> {
        let inner = self.inner(seed)?;
        let times: Vec<f64> = inner.raw_values().iter().map(|v| v.abs()).collect();
        let max = inner_max(&inner);
        let outer = self
            .outer
            .sample(&self.start, &times, max, seed.derive(2).derive(0))?;
        compose_btp(&inner, &outer)
    }

    pub fn kebtp(&self, k: usize, seed: Seed) -> Result<ComposedPath> {
        if k == 0 {
            return Err(Error::invalid("kEBTP needs k >= 1"));
        }
        let inner = self.inner(seed)?;
        let max = inner_max(&inner);
        let label_seed = seed.derive(1);
        let mut decomposition = excursions(&inner)?;
        assign_labels(&mut decomposition, k, label_seed);
        let mut needed: Vec<Vec<f64>> = vec![Vec::new(); k];
        for e in &decomposition.intervals {
            needed[e.label].extend((e.start..=e.end).map(|i| inner.value(i)[0].abs()));
        }
        let outers = needed
            .iter()
            .enumerate()
            .map(|(j, times)| {
                self.outer
                    .sample(&self.start, times, max, seed.derive(2).derive(j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        compose_kebtp(&inner, &outers, label_seed)
    }

    pub fn ebtp(&self, seed: Seed) -> Result<ComposedPath> {
        let inner = self.inner(seed)?;
        let start = self.start.clone();
        let outer = &self.outer;
        compose_ebtp(
            &inner,
            &self.start,
            |req| outer.sample(&start, req.times, req.horizon, req.seed),
            seed.derive(1),
        )
    }
}
