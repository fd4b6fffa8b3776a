//! Acceptance checks 1-9. Runs without the libtest harness so that the
//! per-criterion verdict lines always reach the console.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use btp::convergence::{holder_scaling, joint_law_distance, marginal_match_test};
use btp::exit::{ito_truncation_check, verify_elliptic_fourth_order, verify_exit_distribution, verify_exit_time, ExitSettings};
use btp::halfgen::{halfgen_mc, halfgen_quadrature, HalfGenQuery};
use btp::harness::{self, exact_solution_residual, residual_halving, RunConfig, HALFGEN_BANDWIDTH, HALFGEN_DELTAS, HALFGEN_PAIRS};
use btp::kernels::btp_marginal;
use btp::pde::{bilaplacian_at, solve_exit_moments, Domain};
use btp::quadrature::QuadratureSettings;
use btp::{Builtin, Seed, TestFunction};

/// Result of one criterion: verdict plus a one-line detail.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn sqrt_2_over_pi() -> f64 {
    (2.0 / PI).sqrt()
}

fn marginal_representation() -> Verdict {
    let quad = btp_marginal(&Builtin::Square, &[0.0], 1.0, &QuadratureSettings::default()).unwrap();
    let quad_err = (quad - sqrt_2_over_pi()).abs();
    let config = RunConfig::from_pairs([("experiment", "marginal"), ("f", "square"), ("x", "0"), ("t", "1"), ("n", "100000"), ("seed", "101")]).unwrap();
    let outcome = harness::run(&config).unwrap();
    let mc = outcome.rows().find(|r| r.quantity.starts_with("marginal_mc")).unwrap().clone();
    Verdict::new(
        quad_err <= 1e-8 && mc.pass,
        format!("quadrature error {quad_err:.2e} (tol 1e-8); Monte Carlo {:.5} +/- {:.5}, z = {:.2}", mc.estimate.value, mc.estimate.stderr, mc.z_score),
    )
}

fn parabolic_pde() -> Verdict {
    let exact = exact_solution_residual(8).unwrap();
    let study = residual_halving(&Builtin::Gauss, 0.1).unwrap();
    let ratio = study.ratio();
    Verdict::new(
        exact <= 1e-6 && (3.0..=5.0).contains(&ratio),
        format!("exact-solution residual {exact:.2e} (tol 1e-6); halving ratio {ratio:.3} (need [3, 5])"),
    )
}

fn exit_distribution() -> Verdict {
    let settings = ExitSettings::new(1e-3);
    let interval = Domain::interval(-1.0, 1.0).unwrap();
    let interval_points: Vec<Vec<f64>> = [-0.6, -0.3, 0.0, 0.3, 0.6].iter().map(|&x| vec![x]).collect();
    let cube: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|y: &[f64]| Builtin::Cube.value(y));
    let a = verify_exit_distribution(&interval, cube, &interval_points, 100_000, &settings, Seed::new(301)).unwrap();
    let disk = Domain::centered_ball(1.0, 2).unwrap();
    let disk_points = vec![vec![0.0, 0.0], vec![0.3, 0.0], vec![0.0, 0.6], vec![-0.4, 0.4], vec![0.5, -0.2]];
    let cosine: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(|y: &[f64]| (2.0 * y[0]).cos() + y[1]);
    let b = verify_exit_distribution(&disk, cosine, &disk_points, 100_000, &settings, Seed::new(302)).unwrap();
    let zs: Vec<f64> = a.rows.iter().chain(&b.rows).map(|r| r.z_score).collect();
    let worst = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Verdict::new(
        a.pass() && b.pass(),
        format!("10 start points, n = 1e5 each; max |z| = {worst:.2}"),
    )
}

fn exit_time_moments() -> Verdict {
    let settings = ExitSettings::new(1e-3);
    let interval = Domain::interval(-1.0, 1.0).unwrap();
    let disk = Domain::centered_ball(1.0, 2).unwrap();
    let a = verify_exit_time(&interval, &[vec![0.0]], 100_000, &settings, Seed::new(401)).unwrap();
    let b = verify_exit_time(&disk, &[vec![0.0, 0.0]], 100_000, &settings, Seed::new(402)).unwrap();
    let m_interval = a.row("mean_exit_time[x=0]").unwrap();
    let m_disk = b.row("mean_exit_time[x=0/0]").unwrap();
    let theory_ok = (m_interval.theoretical - 5.0 / 3.0).abs() < 1e-12 && (m_disk.theoretical - 0.375).abs() < 1e-12;
    let mut worst_bilap = 0.0f64;
    for (domain, points) in [
        (&interval, vec![vec![-0.5], vec![0.0], vec![0.7]]),
        (&disk, vec![vec![0.0, 0.0], vec![0.2, -0.3], vec![-0.5, 0.1]]),
    ] {
        let m = solve_exit_moments(domain).unwrap();
        for x in points {
            let v = bilaplacian_at(|y| m.m2_polynomial(y), &x, 0.05).unwrap();
            worst_bilap = worst_bilap.max((v - 8.0).abs());
        }
    }
    let paired_a = a.row("paired_exit_time_minus_tau_sq[x=0]").unwrap();
    let paired_b = b.row("paired_exit_time_minus_tau_sq[x=0/0]").unwrap();
    Verdict::new(
        theory_ok && a.pass() && b.pass() && worst_bilap <= 1e-6,
        format!(
            "interval E T = {:.4} +/- {:.4} (5/3, z = {:.2}); disk E T = {:.4} +/- {:.4} (0.375, z = {:.2}); max |discrete bilaplacian m2 - 8| = {worst_bilap:.1e}; paired z = {:.2}, {:.2}",
            m_interval.estimate.value, m_interval.estimate.stderr, m_interval.z_score,
            m_disk.estimate.value, m_disk.estimate.stderr, m_disk.z_score,
            paired_a.z_score, paired_b.z_score
        ),
    )
}

fn elliptic_fourth_order() -> Verdict {
    let interval = Domain::interval(-1.0, 1.0).unwrap();
    let points: Vec<Vec<f64>> = [-0.6, -0.3, 0.0, 0.3, 0.6].iter().map(|&x| vec![x]).collect();
    let sq = verify_elliptic_fourth_order(&interval, &Builtin::Square, &points, 0.05, 1e-4).unwrap();
    let square_ok = sq
        .rows
        .iter()
        .filter(|r| r.quantity.starts_with("four_laplacian_rhs"))
        .all(|r| r.pass && r.gates() && r.theoretical == 8.0)
        && sq.pass();
    let cu = verify_elliptic_fourth_order(&interval, &Builtin::Cube, &points, 0.05, 1e-4).unwrap();
    let mut cube_ok = cu.pass();
    let mut worst = 0.0f64;
    let mut printed_mismatch = true;
    for x in &points {
        let tag = format!("f=cube;x={}", x[0]);
        let derived = cu.row(&format!("derived_rhs[{tag}]")).unwrap();
        let printed = cu.row(&format!("printed_rhs[{tag}]")).unwrap();
        // Independent value of the bi-Laplacian of u for the cube.
        let exact = 120.0 * x[0];
        worst = worst.max((derived.estimate.value - exact).abs());
        cube_ok &= (derived.estimate.value - exact).abs() <= 1e-4 && (derived.theoretical - exact).abs() <= 1e-9;
        printed_mismatch &= !printed.gates() && (printed.theoretical - 72.0 * x[0]).abs() <= 1e-9;
        if x[0] != 0.0 {
            printed_mismatch &= !printed.pass;
        }
    }
    Verdict::new(
        square_ok && cube_ok && printed_mismatch,
        format!("f = y^2: 8 at 5 nodes; f = y^3: max |bilaplacian u - 120x| = {worst:.1e}, derived RHS matches, printed RHS 72x recorded as mismatch"),
    )
}

fn ito_expansion() -> Verdict {
    let mut ok = true;
    let mut worst = 0.0f64;
    for f in [Builtin::Linear, Builtin::Square, Builtin::Cube] {
        for (t, x) in [(0.3, -0.7), (1.0, 0.0), (2.5, 1.3)] {
            let r = ito_truncation_check(&f, t, &[x], 1e-8).unwrap();
            ok &= r.pass();
            for row in &r.rows {
                worst = worst.max((row.estimate.value - row.theoretical).abs());
            }
        }
    }
    Verdict::new(ok, format!("fixtures y, y^2, y^3 at 3 (t, x) pairs; max gap {worst:.1e} (tol 1e-8)"))
}

/// Independent high-precision values of the half-derivative generator.
const HALFGEN_ORACLE: [(f64, f64, &str, f64); 8] = [
    (0.5, 0.0, "linear", 0.0),
    (0.5, 0.0, "square", 0.797_884_560_802_865_4),
    (0.5, 1.0, "linear", -0.729_325_635_358_531_2),
    (0.5, 1.0, "square", -0.660_766_709_914_197_0),
    (1.0, 0.0, "linear", 0.0),
    (1.0, 0.0, "square", 0.797_884_560_802_865_4),
    (1.0, 1.0, "linear", -0.593_397_619_314_757_5),
    (1.0, 1.0, "square", -0.388_910_677_826_649_6),
];

fn half_generator() -> Verdict {
    let settings = QuadratureSettings::default();
    let mut ok = true;
    let mut lines = Vec::new();
    for (j, &(s, xi, name, oracle)) in HALFGEN_ORACLE.iter().enumerate() {
        let f = Builtin::from_name(name).unwrap();
        let q = HalfGenQuery { s, xi, x0: 0.0, f: &f };
        let quad = halfgen_quadrature(&q, &settings).unwrap();
        let quad_ok = (quad - oracle).abs() <= 1e-8_f64.max(1e-6 * oracle.abs());
        if xi == 0.0 && name == "square" {
            ok &= (quad - sqrt_2_over_pi()).abs() <= 1e-8;
        }
        let mc = halfgen_mc(&q, &HALFGEN_DELTAS, HALFGEN_PAIRS, HALFGEN_BANDWIDTH, Seed::new(700).derive(j as u64)).unwrap();
        let err = (mc.estimate.value - quad).abs();
        let mc_ok = err <= (3.0 * mc.estimate.stderr).max(0.1 * quad.abs());
        ok &= quad_ok && mc_ok;
        lines.push(format!("{name} s={s} xi={xi}: {:.4}+/-{:.4} vs {quad:.4}{}", mc.estimate.value, mc.estimate.stderr, if mc_ok { "" } else { " FAIL" }));
    }
    Verdict::new(ok, lines.join("; "))
}

fn convergence_checks() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, k) in [2usize, 5].into_iter().enumerate() {
        let ks = marginal_match_test(k, 1.0, 100_000, Seed::new(801).derive(j as u64)).unwrap();
        ok &= ks.p_value > 0.01;
        parts.push(format!("KS p(k={k}) = {:.3}", ks.p_value));
    }
    let mut prev: Option<btp::convergence::JointDistance> = None;
    let mut ds = Vec::new();
    for k in [2usize, 4, 8, 16] {
        let d = joint_law_distance(k, (0.5, 1.0), 100_000, Seed::new(802).derive(k as u64)).unwrap();
        if let Some(p) = prev {
            ok &= d.distance - p.distance <= 2.0 * (d.stderr.powi(2) + p.stderr.powi(2)).sqrt();
        }
        ds.push(format!("{:.4}", d.distance));
        prev = Some(d);
    }
    parts.push(format!("joint distances k=2,4,8,16: {}", ds.join(", ")));
    let h = holder_scaling(2.0, &harness::DEFAULT_LAGS, 100_000, Seed::new(803)).unwrap();
    ok &= (0.43..=0.57).contains(&h.slope);
    parts.push(format!("p=2 slope {:.4} +/- {:.4} (need [0.43, 0.57])", h.slope, h.slope_stderr));
    Verdict::new(ok, parts.join("; "))
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

fn reproducibility() -> Verdict {
    let dir = std::env::temp_dir().join(format!("btp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let runs: [&[&str]; 6] = [
        &["marginal", "--n", "20000", "--f", "cosine", "--x", "0.3"],
        &["pde-residual", "--step", "0.2"],
        &["exit", "--domain", "ball:1,2", "--x", "0.2,0.1", "--n", "2000", "--step", "0.01", "--f", "harmonic2d"],
        &["thm4", "--f", "square"],
        &["halfgen", "--xi", "1", "--n", "200000", "--bandwidth", "0.05"],
        &["converge", "--n", "4000", "--k", "3"],
    ];
    let mut ok = true;
    let mut names = Vec::new();
    for args in runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out: PathBuf = dir.join(format!("{}-{rep}.csv", args[0]));
            let status = Command::new(env!("CARGO_BIN_EXE_btp"))
                .args(args)
                .args(["--seed", "9", "--out"])
                .arg(&out)
                .output()
                .unwrap();
            // Verdicts may differ from zero at these tiny sizes; only usage errors count.
            ok &= status.status.code() != Some(2);
            outputs.push(std::fs::read_to_string(&out).unwrap_or_default());
        }
        let same = !data_rows(&outputs[0]).is_empty() && data_rows(&outputs[0]) == data_rows(&outputs[1]);
        ok &= same;
        names.push(format!("{}{}", args[0], if same { "" } else { " DIFFERS" }));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Verdict::new(ok, format!("byte-identical data rows for: {}", names.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("marginal representation", marginal_representation),
        ("parabolic fourth-order PDE", parabolic_pde),
        ("exit distribution", exit_distribution),
        ("exit-time moments", exit_time_moments),
        ("elliptic fourth-order identity", elliptic_fourth_order),
        ("Ito expansion for biharmonic f", ito_expansion),
        ("half-derivative generator", half_generator),
        ("excursion-based convergence", convergence_checks),
        ("reproducibility", reproducibility),
    ];
    let only: Option<usize> = std::env::var("BTP_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        println!(
            "criterion {id} ({name}): {} [{:.1}s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
