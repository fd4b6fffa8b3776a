//! Experiment registry, configuration, CSV output and the command-line entry
//! point used by the `btp` binary.
//!
//! Parameters come from an optional `key = value` file overlaid by command-line
//! flags. Every run writes a CSV file whose `#` lines carry the metadata needed
//! to repeat it (the only wall-clock value lives in a comment line) and prints
//! a summary. The exit status is 0 iff every gating row passes.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use rayon::prelude::*;

use crate::compose::BtpSampler;
use crate::convergence::{holder_scaling, joint_law_distance, marginal_match_test};
use crate::error::{Error, Result};
use crate::exit::{
    ito_truncation_check, verify_elliptic_fourth_order, verify_exit_distribution, verify_exit_time, ExitSettings,
};
use crate::halfgen::{halfgen_mc, halfgen_quadrature, HalfGenQuery};
use crate::kernels::btp_marginal;
use crate::paths::{GeneratorSpec, TimeGrid};
use crate::pde::{bilaplacian_at, parabolic_residual, solve_exit_moments, Domain, ResidualOptions, SpaceTimeGrid};
use crate::quadrature::QuadratureSettings;
use crate::report::{ReportRow, VerificationReport};
use crate::rng::{Seed, GENERATOR_ID};
use crate::stats::Estimate;
use crate::testfn::{Builtin, TestFunction};

/// Registered experiment names.
pub const EXPERIMENTS: [&str; 6] = ["marginal", "pde-residual", "exit", "thm4", "halfgen", "converge"];

/// Keys accepted in config files and as `--key` flags.
pub const KEYS: [&str; 18] = [
    "experiment", "seed", "n", "t", "x", "domain", "f", "k", "p", "lags", "step", "out", "xi", "x0", "s", "deltas",
    "bandwidth", "tol",
];

/// CSV column header.
pub const CSV_HEADER: &str = "quantity,theoretical,estimate,stderr,n,z_score,pass";

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Marginal,
    PdeResidual,
    Exit,
    EllipticFourthOrder,
    Halfgen,
    Converge,
}

impl Experiment {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "marginal" => Experiment::Marginal,
            "pde-residual" => Experiment::PdeResidual,
            "exit" => Experiment::Exit,
            "thm4" => Experiment::EllipticFourthOrder,
            "halfgen" => Experiment::Halfgen,
            "converge" => Experiment::Converge,
            other => {
                return Err(Error::Usage(format!(
                    "unknown experiment `{other}` (expected one of: {})",
                    EXPERIMENTS.join(", ")
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Marginal => "marginal",
            Experiment::PdeResidual => "pde-residual",
            Experiment::Exit => "exit",
            Experiment::EllipticFourthOrder => "thm4",
            Experiment::Halfgen => "halfgen",
            Experiment::Converge => "converge",
        }
    }
}

/// Typed parameters; `None` means "use the experiment default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub n: Option<usize>,
    pub t: Option<f64>,
    /// One or more points.
    pub x: Option<Vec<Vec<f64>>>,
    pub domain: Option<Domain>,
    pub f: Option<Builtin>,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub lags: Option<Vec<f64>>,
    pub step: Option<f64>,
    pub xi: Option<f64>,
    pub x0: Option<f64>,
    pub s: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub bandwidth: Option<f64>,
    pub tol: Option<f64>,
}

/// A validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: Params,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn usage(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Usage(format!("invalid value for `{key}`: {msg}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| usage(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(usage(key, "must be finite"));
    }
    Ok(x)
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x = parse_f64(key, v)?;
    if x <= 0.0 {
        return Err(usage(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn parse_count(key: &str, v: &str, min: usize) -> Result<usize> {
    // Accept scientific notation such as 1e5 for counts.
    let x = parse_f64(key, v)?;
    if x.fract() != 0.0 || x < min as f64 || x > u32::MAX as f64 * 16.0 {
        return Err(usage(key, format!("must be an integer >= {min}, got {v}")));
    }
    Ok(x as usize)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn parse_decreasing(key: &str, v: &str) -> Result<Vec<f64>> {
    let xs = parse_list(key, v)?;
    if xs.len() < 2 {
        return Err(usage(key, "need at least two values"));
    }
    if xs.iter().any(|x| *x <= 0.0) || xs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(usage(key, "values must be positive and strictly decreasing"));
    }
    Ok(xs)
}

/// Points separated by `;`, coordinates by `,`.
fn parse_points(v: &str) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<Vec<f64>> = v
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_list("x", s))
        .collect::<Result<_>>()?;
    if pts.is_empty() || pts.iter().any(|p| p.is_empty()) {
        return Err(usage("x", "expected points like `0` or `0.3,0;0,0.6`"));
    }
    Ok(pts)
}

/// Parse a config file: one `key = value` per line, `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Build a config from key/value pairs; later pairs override earlier ones.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut experiment = None;
        let mut params = Params::default();
        let mut seed = DEFAULT_SEED;
        let mut out = None;
        for (key, v) in pairs {
            match key {
                "experiment" => experiment = Some(Experiment::from_name(v.trim())?),
                "seed" => seed = v.trim().parse().map_err(|_| usage(key, format!("`{v}` is not a u64")))?,
                "n" => params.n = Some(parse_count(key, v, 2)?),
                "t" => params.t = Some(parse_positive(key, v)?),
                "x" => params.x = Some(parse_points(v)?),
                "domain" => params.domain = Some(Domain::parse(v.trim()).map_err(|e| usage(key, e))?),
                "f" => params.f = Some(Builtin::from_name(v.trim()).map_err(|e| usage(key, e))?),
                "k" => params.k = Some(parse_count(key, v, 1)?),
                "p" => params.p = Some(parse_positive(key, v)?),
                "lags" => {
                    let lags = parse_decreasing(key, v)?;
                    if lags.len() < 3 || lags[0] > 0.5 {
                        return Err(usage(key, "need at least three lags in (0, 0.5]"));
                    }
                    params.lags = Some(lags)
                }
                "step" => params.step = Some(parse_positive(key, v)?),
                "out" => out = Some(PathBuf::from(v.trim())),
                "xi" => params.xi = Some(parse_f64(key, v)?),
                "x0" => params.x0 = Some(parse_f64(key, v)?),
                "s" => params.s = Some(parse_positive(key, v)?),
                "deltas" => params.deltas = Some(parse_decreasing(key, v)?),
                "bandwidth" => params.bandwidth = Some(parse_positive(key, v)?),
                "tol" => params.tol = Some(parse_positive(key, v)?),
                other => return Err(Error::Usage(format!("unknown key `{other}`"))),
            }
        }
        let experiment = experiment.ok_or_else(|| Error::Usage("no experiment given".into()))?;
        Ok(RunConfig {
            experiment,
            params,
            seed,
            out,
        })
    }
}

/// Reports plus the fully resolved parameter set of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub reports: Vec<VerificationReport>,
    pub params: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass())
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.reports.iter().flat_map(|r| r.rows.iter())
    }
}

fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Point formatting inside row names, which must stay free of commas.
fn tag_point(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")
}

fn fmt_points(xs: &[Vec<f64>]) -> String {
    xs.iter().map(|x| fmt_point(x)).collect::<Vec<_>>().join(";")
}

fn fmt_list(xs: &[f64]) -> String {
    fmt_point(xs)
}

/// Execute the configured experiment.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let seed = Seed::new(config.seed);
    match config.experiment {
        Experiment::Marginal => run_marginal(&config.params, seed),
        Experiment::PdeResidual => run_pde_residual(&config.params),
        Experiment::Exit => run_exit(&config.params, seed),
        Experiment::EllipticFourthOrder => run_elliptic(&config.params),
        Experiment::Halfgen => run_halfgen(&config.params, seed),
        Experiment::Converge => run_converge(&config.params, seed),
    }
}

fn check_dim(f: &Builtin, x: &[f64]) -> Result<()> {
    if x.len() < f.min_dim() {
        return Err(usage("x", format!("f = {} needs points of dimension >= {}", f.name(), f.min_dim())));
    }
    Ok(())
}

/// Closed-form `E f(x + W(|B_t|))` for the fixtures where one exists.
pub fn btbm_marginal_closed_form(f: &Builtin, x: &[f64], t: f64) -> Option<f64> {
    let a1 = (2.0 * t / std::f64::consts::PI).sqrt();
    match f {
        Builtin::Constant(c) => Some(*c),
        Builtin::Linear | Builtin::Harmonic2d => Some(f.value(x)),
        Builtin::Square => Some(f.value(x) + x.len() as f64 * a1),
        Builtin::Cube => Some(x[0].powi(3) + 3.0 * x[0] * a1),
        // E exp(-|B_t|/2) = exp(t/8) erfc(sqrt(t/8)).
        Builtin::Cosine => Some(x[0].cos() * (t / 8.0).exp() * statrs::function::erf::erfc((t / 8.0).sqrt())),
        Builtin::Gauss => None,
    }
}

/// Inner-grid steps for the composed paths of the marginal experiment.
const MARGINAL_INNER_STEPS: usize = 16;

fn run_marginal(p: &Params, seed: Seed) -> Result<RunOutcome> {
    let f = p.f.unwrap_or(Builtin::Square);
    let xs = p.x.clone().unwrap_or_else(|| vec![vec![0.0; f.min_dim()]]);
    let t = p.t.unwrap_or(1.0);
    let n = p.n.unwrap_or(100_000);
    let tol = p.tol.unwrap_or(1e-8);
    let settings = QuadratureSettings::default();
    let mut report = VerificationReport::new("marginal");
    for (j, x) in xs.iter().enumerate() {
        check_dim(&f, x)?;
        let tag = format!("f={};x={};t={t}", f.name(), tag_point(x));
        let quad = btp_marginal(&f, x, t, &settings)?;
        if let Some(exact) = btbm_marginal_closed_form(&f, x, t) {
            report.push(ReportRow::absolute(format!("marginal_quadrature[{tag}]"), exact, quad, tol));
        }
        let sampler = BtpSampler::brownian(x.clone(), TimeGrid::uniform(t, MARGINAL_INNER_STEPS)?);
        let point_seed = seed.derive(j as u64);
        let values = (0..n)
            .into_par_iter()
            .map(|i| sampler.btp(point_seed.derive(i as u64)).map(|c| f.value(c.path.terminal())))
            .collect::<Result<Vec<f64>>>()?;
        report.push(ReportRow::statistical(
            format!("marginal_mc[{tag}]"),
            quad,
            Estimate::from_samples(&values)?,
        )?);
    }
    Ok(RunOutcome {
        reports: vec![report],
        params: vec![
            ("f".into(), f.name()),
            ("x".into(), fmt_points(&xs)),
            ("t".into(), t.to_string()),
            ("n".into(), n.to_string()),
            ("tol".into(), tol.to_string()),
            ("inner_steps".into(), MARGINAL_INNER_STEPS.to_string()),
        ],
    })
}

/// Max residual of the exact solution `x² + sqrt(2t/π)` for `f = y²` on
/// `t ∈ [0.1, 1]`, `x ∈ [-2, 2]` with `h = dt = 1e-2`.
pub fn exact_solution_residual(time_order: usize) -> Result<f64> {
    let grid = SpaceTimeGrid::new(-2.0, 2.0, 1e-2, 0.1, 1.0, 1e-2)?;
    let u = grid.tabulate(|t, x| x * x + (2.0 * t / std::f64::consts::PI).sqrt());
    let r = parabolic_residual(&u, &grid, &Builtin::Square, &GeneratorSpec::HalfLaplacian, ResidualOptions { time_order })?;
    Ok(r.max_abs())
}

/// Residuals of the quadrature-built solution on a grid and on its halving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingStudy {
    pub coarse: f64,
    pub fine: f64,
}

impl HalvingStudy {
    pub fn ratio(&self) -> f64 {
        self.coarse / self.fine
    }
}

/// Second-order residual of `u(t, x) = E f(x + W(|B_t|))` (quadrature) on
/// `x ∈ [-2, 2]`, `t ∈ [0.2, 1]` with `(h, dt) = (step, step/2)` and on the
/// halved grid, both measured at the coarse interior nodes.
pub fn residual_halving(f: &dyn TestFunction, step: f64) -> Result<HalvingStudy> {
    let settings = QuadratureSettings::default();
    let residual = |h: f64| -> Result<crate::pde::Residual> {
        let grid = SpaceTimeGrid::new(-2.0, 2.0, h, 0.2, 1.0, h / 2.0)?;
        let ts = grid.t_nodes().to_vec();
        let rows = ts
            .par_iter()
            .map(|&t| grid.x_nodes().iter().map(|&x| btp_marginal(f, &[x], t, &settings)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let u = grid.try_tabulate(|t, x| {
            let i = ts.iter().position(|s| *s == t).expect("node");
            let j = grid.x_nodes().iter().position(|y| *y == x).expect("node");
            Ok(rows[i][j])
        })?;
        parabolic_residual(&u, &grid, f, &GeneratorSpec::HalfLaplacian, ResidualOptions::default())
    };
    let coarse = residual(step)?;
    let fine = residual(step / 2.0)?;
    let mut c = 0.0f64;
    let mut m = 0.0f64;
    for (i, &t) in coarse.t_nodes.iter().enumerate() {
        for (j, &x) in coarse.x_nodes.iter().enumerate() {
            let r = fine
                .at(t, x)
                .ok_or_else(|| Error::NumericalDomain(format!("fine grid lacks node ({t}, {x})")))?;
            c = c.max(coarse.values[[i, j]].abs());
            m = m.max(r.abs());
        }
    }
    Ok(HalvingStudy { coarse: c, fine: m })
}

fn run_pde_residual(p: &Params) -> Result<RunOutcome> {
    let f = p.f.unwrap_or(Builtin::Gauss);
    check_dim(&f, &[0.0])?;
    let step = p.step.unwrap_or(0.1);
    let tol = p.tol.unwrap_or(1e-6);
    let mut report = VerificationReport::new("pde_residual");
    let exact = exact_solution_residual(8)?;
    report.push(ReportRow::absolute("exact_solution_max_residual[f=square]", 0.0, exact, tol));
    let study = residual_halving(&f, step)?;
    report.push(ReportRow::informational(
        format!("quadrature_residual_coarse[f={};h={step}]", f.name()),
        0.0,
        study.coarse,
        f64::INFINITY,
    ));
    report.push(ReportRow::informational(
        format!("quadrature_residual_fine[f={};h={}]", f.name(), step / 2.0),
        0.0,
        study.fine,
        f64::INFINITY,
    ));
    report.push(ReportRow::absolute(
        format!("residual_halving_ratio[f={}]", f.name()),
        4.0,
        study.ratio(),
        1.0,
    ));
    Ok(RunOutcome {
        reports: vec![report],
        params: vec![
            ("f".into(), f.name()),
            ("step".into(), step.to_string()),
            ("tol".into(), tol.to_string()),
            ("exact_grid".into(), "h=dt=0.01,t=[0.1,1],x=[-2,2],time_order=8".into()),
            ("halving_grid".into(), "dt=h/2,t=[0.2,1],x=[-2,2],time_order=2".into()),
        ],
    })
}

fn default_domain_points(domain: &Domain) -> Vec<Vec<f64>> {
    vec![domain.center_radius().0]
}

fn run_exit(p: &Params, seed: Seed) -> Result<RunOutcome> {
    let domain = p.domain.clone().unwrap_or(Domain::interval(-1.0, 1.0)?);
    let xs = p.x.clone().unwrap_or_else(|| default_domain_points(&domain));
    let f = p.f.unwrap_or(Builtin::Linear);
    let n = p.n.unwrap_or(100_000);
    let step = p.step.unwrap_or(1e-3);
    let tol = p.tol.unwrap_or(1e-6);
    for x in &xs {
        if x.len() != domain.dim() {
            return Err(usage("x", format!("point {} does not match domain dimension {}", fmt_point(x), domain.dim())));
        }
        if !domain.contains_closure(x, 0.0) {
            return Err(usage("x", format!("point {} lies outside the domain", fmt_point(x))));
        }
        check_dim(&f, x)?;
    }
    let settings = ExitSettings::new(step);
    let mut report = verify_exit_time(&domain, &xs, n, &settings, seed.derive(0))?;
    let moments = solve_exit_moments(&domain)?;
    for x in &xs {
        let b = bilaplacian_at(|y| moments.m2_polynomial(y), x, 0.05)?;
        report.push(ReportRow::absolute(format!("m2_discrete_bilaplacian[x={}]", tag_point(x)), 8.0, b, tol));
    }
    let data: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(move |y: &[f64]| f.value(y));
    let dist = verify_exit_distribution(&domain, data, &xs, n, &settings, seed.derive(1))?;
    Ok(RunOutcome {
        reports: vec![report, dist],
        params: vec![
            ("domain".into(), domain.to_string()),
            ("x".into(), fmt_points(&xs)),
            ("f".into(), f.name()),
            ("n".into(), n.to_string()),
            ("step".into(), step.to_string()),
            ("tol".into(), tol.to_string()),
        ],
    })
}

fn elliptic_default_points(domain: &Domain) -> Vec<Vec<f64>> {
    let (c, r) = domain.center_radius();
    let mut pts = Vec::new();
    for a in [-0.6, -0.3, 0.0, 0.3, 0.6] {
        let mut x = c.clone();
        x[0] += a * r;
        pts.push(x);
    }
    pts
}

fn run_elliptic(p: &Params) -> Result<RunOutcome> {
    let domain = p.domain.clone().unwrap_or(Domain::interval(-1.0, 1.0)?);
    let f = p.f.unwrap_or(Builtin::Cube);
    let xs = p.x.clone().unwrap_or_else(|| elliptic_default_points(&domain));
    let h = p.step.unwrap_or(0.05);
    let tol = p.tol.unwrap_or(1e-4);
    let t = p.t.unwrap_or(1.0);
    for x in &xs {
        if x.len() != domain.dim() {
            return Err(usage("x", format!("point {} does not match domain dimension {}", fmt_point(x), domain.dim())));
        }
        check_dim(&f, x)?;
    }
    let mut reports = vec![verify_elliptic_fourth_order(&domain, &f, &xs, h, tol)?];
    if f.is_biharmonic() {
        let mut ito = VerificationReport::new("ito_expansion");
        for x in &xs {
            ito.extend(ito_truncation_check(&f, t, x, 1e-8)?);
        }
        reports.push(ito);
    }
    Ok(RunOutcome {
        reports,
        params: vec![
            ("domain".into(), domain.to_string()),
            ("f".into(), f.name()),
            ("x".into(), fmt_points(&xs)),
            ("step".into(), h.to_string()),
            ("tol".into(), tol.to_string()),
            ("t".into(), t.to_string()),
        ],
    })
}

/// Increments used by the half-generator experiment unless overridden.
pub const HALFGEN_DELTAS: [f64; 4] = [0.01, 0.005, 0.0025, 0.00125];
pub const HALFGEN_BANDWIDTH: f64 = 0.03;
pub const HALFGEN_PAIRS: usize = 4_000_000;

fn run_halfgen(p: &Params, seed: Seed) -> Result<RunOutcome> {
    let f = p.f.unwrap_or(Builtin::Square);
    check_dim(&f, &[0.0])?;
    let s = p.s.unwrap_or(1.0);
    let xi = p.xi.unwrap_or(0.0);
    let x0 = p.x0.unwrap_or(0.0);
    let n = p.n.unwrap_or(HALFGEN_PAIRS);
    let bandwidth = p.bandwidth.unwrap_or(HALFGEN_BANDWIDTH);
    let deltas = p.deltas.clone().unwrap_or_else(|| HALFGEN_DELTAS.to_vec());
    let tol = p.tol.unwrap_or(1e-8);
    let q = HalfGenQuery { s, xi, x0, f: &f };
    let quad = halfgen_quadrature(&q, &QuadratureSettings::default())?;
    let tag = format!("f={};s={s};xi={xi};x0={x0}", f.name());
    let mut report = VerificationReport::new("half_generator");
    if xi == x0 {
        let exact = f.laplacian(&[xi]) / (2.0 * std::f64::consts::PI).sqrt();
        report.push(ReportRow::absolute(format!("halfgen_quadrature[{tag}]"), exact, quad, tol));
    }
    let mc = halfgen_mc(&q, &deltas, n, bandwidth, seed)?;
    report.push(ReportRow::statistical_or_relative(format!("halfgen_mc[{tag}]"), quad, mc.estimate, 0.1)?);
    for (d, v) in mc.deltas.iter().zip(&mc.quotients) {
        report.meta(format!("quotient[delta={d}]"), format!("{v:.6}"));
    }
    report.meta("extrapolation_exponent", mc.exponent);
    Ok(RunOutcome {
        reports: vec![report],
        params: vec![
            ("f".into(), f.name()),
            ("s".into(), s.to_string()),
            ("xi".into(), xi.to_string()),
            ("x0".into(), x0.to_string()),
            ("n".into(), n.to_string()),
            ("bandwidth".into(), bandwidth.to_string()),
            ("deltas".into(), fmt_list(&deltas)),
            ("tol".into(), tol.to_string()),
        ],
    })
}

/// Default increment lags of the moment-scaling check.
pub const DEFAULT_LAGS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn run_converge(p: &Params, seed: Seed) -> Result<RunOutcome> {
    let k = p.k.unwrap_or(2);
    let t = p.t.unwrap_or(1.0);
    let n = p.n.unwrap_or(100_000);
    let pw = p.p.unwrap_or(2.0);
    let lags = p.lags.clone().unwrap_or_else(|| DEFAULT_LAGS.to_vec());
    let mut report = VerificationReport::new("convergence");

    let ks = marginal_match_test(k, t, n, seed.derive(0))?;
    report.push(ReportRow::exceeds(format!("marginal_ks_p_value[k={k};t={t}]"), 0.01, ks.p_value));
    report.meta(format!("ks_statistic[k={k}]"), ks.statistic);

    let times = (t / 2.0, t);
    let ladder: Vec<usize> = (0..4).map(|j| k << j).collect();
    let mut prev: Option<(usize, crate::convergence::JointDistance)> = None;
    for &kk in &ladder {
        let d = joint_law_distance(kk, times, n, seed.derive(1).derive(kk as u64))?;
        report.meta(format!("joint_distance[k={kk}]"), format!("{:.6} +/- {:.6}", d.distance, d.stderr));
        if let Some((pk, pd)) = prev {
            let change = Estimate {
                value: d.distance - pd.distance,
                stderr: (d.stderr.powi(2) + pd.stderr.powi(2)).sqrt(),
                n,
            };
            report.push(ReportRow::at_most_sigma(format!("joint_distance_change[k={pk}->{kk}]"), 0.0, change, 2.0)?);
        }
        prev = Some((kk, d));
    }

    let scaling = holder_scaling(pw, &lags, n, seed.derive(2))?;
    let mut slope = ReportRow::absolute(format!("holder_slope[p={pw}]"), pw / 4.0, scaling.slope, 0.035 * pw);
    slope.estimate = Estimate { value: scaling.slope, stderr: scaling.slope_stderr, n };
    report.push(slope);

    Ok(RunOutcome {
        reports: vec![report],
        params: vec![
            ("k".into(), k.to_string()),
            ("t".into(), t.to_string()),
            ("n".into(), n.to_string()),
            ("p".into(), pw.to_string()),
            ("lags".into(), fmt_list(&lags)),
            ("joint_times".into(), format!("{},{}", times.0, times.1)),
        ],
    })
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

/// Data rows of the CSV (header included), 17 significant digits.
pub fn csv_rows(outcome: &RunOutcome) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in outcome.rows() {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            csv_field(&r.quantity), r.theoretical, r.estimate.value, r.estimate.stderr, r.estimate.n, r.z_score, r.pass
        );
    }
    s
}

/// Full CSV text: metadata comments followed by [`csv_rows`].
pub fn render_csv(config: &RunConfig, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(s, "# experiment: {}", config.experiment.name());
    let params: Vec<String> = outcome.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(s, "# params: {}", params.join("; "));
    let _ = writeln!(s, "# seed: {}", config.seed);
    let _ = writeln!(s, "# generator: {GENERATOR_ID}");
    let _ = writeln!(s, "# version: btp {}", env!("CARGO_PKG_VERSION"));
    for rep in &outcome.reports {
        for (k, v) in &rep.metadata {
            let _ = writeln!(s, "# {}.{k}: {v}", rep.name);
        }
    }
    let _ = writeln!(s, "# created_unix: {stamp}");
    s.push_str(&csv_rows(outcome));
    s
}

/// Human-readable summary, one line per row plus a verdict.
pub fn summary(config: &RunConfig, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    for r in outcome.rows() {
        let tag = if !r.gates() {
            "INFO"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            s,
            "{tag} {}: theoretical {:.10} estimate {:.10} stderr {:.3e} z {:.3}",
            r.quantity, r.theoretical, r.estimate.value, r.estimate.stderr, r.z_score
        );
    }
    let _ = writeln!(
        s,
        "{}: {}",
        config.experiment.name(),
        if outcome.pass() { "all checks passed" } else { "some checks FAILED" }
    );
    s
}

#[derive(Parser, Debug)]
#[command(name = "btp", version, about = "Brownian-time process experiments")]
struct Cli {
    /// One of: marginal, pde-residual, exit, thm4, halfgen, converge.
    experiment: Option<String>,
    /// Master seed (default 42).
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Monte Carlo replicates.
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Time horizon.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Point(s): coordinates separated by `,`, points by `;`.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// `interval:a,b` or `ball:r,d`.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Test function: constant, linear, square, cube, gauss, cosine, harmonic2d.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    /// Number of outer copies (kEBTP).
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Moment order for the scaling check.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Strictly decreasing lags in (0, 0.5], comma separated.
    #[arg(long, allow_hyphen_values = true)]
    lags: Option<String>,
    /// Exit-walk step, grid spacing or finite-difference step, by experiment.
    #[arg(long, allow_hyphen_values = true)]
    step: Option<String>,
    /// CSV output path (default btp_<experiment>.csv).
    #[arg(long, allow_hyphen_values = true)]
    out: Option<String>,
    /// File of `key = value` lines; flags override it.
    #[arg(long, allow_hyphen_values = true)]
    config: Option<String>,
    /// Conditioning value of the half generator.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Start of the outer Brownian motion (half generator).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Conditioning time (half generator).
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    /// Strictly decreasing increments, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    deltas: Option<String>,
    /// Kernel bandwidth (half generator).
    #[arg(long, allow_hyphen_values = true)]
    bandwidth: Option<String>,
    /// Tolerance override for deterministic checks.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
}

impl Cli {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let fields: [(&'static str, &Option<String>); 18] = [
            ("experiment", &self.experiment),
            ("seed", &self.seed),
            ("n", &self.n),
            ("t", &self.t),
            ("x", &self.x),
            ("domain", &self.domain),
            ("f", &self.f),
            ("k", &self.k),
            ("p", &self.p),
            ("lags", &self.lags),
            ("step", &self.step),
            ("out", &self.out),
            ("xi", &self.xi),
            ("x0", &self.x0),
            ("s", &self.s),
            ("deltas", &self.deltas),
            ("bandwidth", &self.bandwidth),
            ("tol", &self.tol),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

/// Exit status for usage errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status when the run completed but a check failed, or a run-time error occurred.
pub const EXIT_FAILURE: i32 = 1;

fn execute(cli: &Cli) -> Result<bool> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read config `{path}`: {e}")))?;
        pairs.extend(parse_config_text(&text)?);
    }
    pairs.extend(cli.pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
    let config = RunConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let outcome = run(&config).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Usage(msg),
        other => other,
    })?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("btp_{}.csv", config.experiment.name())));
    std::fs::write(&out, render_csv(&config, &outcome))?;
    print!("{}", summary(&config, &outcome));
    println!("wrote {}", out.display());
    Ok(outcome.pass())
}

/// Parse `args` (program name first), run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => EXIT_FAILURE,
        Err(e @ Error::Usage(_)) => {
            eprintln!("btp: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("btp: {e}");
            EXIT_FAILURE
        }
    }
}
