//! Acceptance suite. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyak_lab::certify::{complexity_gauge, global_curvature, global_curvature_empirical};
use polyak_lab::dynamics::{escape_experiment, product_spectral_radius};
use polyak_lab::objective::Objective;
use polyak_lab::optimizer::{run, stochastic_ensemble, RunConfig};
use polyak_lab::testbed::{
    exact_trajectory, holder_worstcase_gap, kappa_for_horizon, make_objective, worstcase_initial_point,
    InterpolatedLeastSquares, ObjectiveSpec, TestObjective,
};
use polyak_lab::theory::{lemma_a1_margin, lower_bound, rate_fit, recursion_envelope, upper_bound, BoundKind, BoundParams, BoundQuery};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn lb_smooth(gamma: f64, k: u64) -> f64 {
    lower_bound(&BoundQuery::new(
        BoundKind::LbSmooth,
        BoundParams {
            gamma: Some(gamma),
            horizon: Some(k),
            ..Default::default()
        },
    ))
    .unwrap()
    .value
}

fn c1_worstcase_exactness() -> Outcome {
    let (kappa, gamma) = (5.0, 1.0);
    let x0 = [1.0, 35f64.sqrt()];
    let q = make_objective(&ObjectiveSpec::QuadQ { kappa }).unwrap();
    let cfg = RunConfig::new(gamma, 15).with_tolerances(0.0, 0.0);
    let (trace, elapsed) = timed(|| run(&q, &x0, &cfg).unwrap());
    let recs = trace.records();
    let mut worst_traj: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..=15u64 {
        let (xe, ge) = exact_trajectory(gamma, kappa, x0, k).unwrap();
        let r = &recs[k as usize];
        worst_traj = worst_traj.max(rel(r.x[0], xe[0])).max(rel(r.x[1], xe[1])).max(rel(r.gap, ge));
        if k > 0 {
            let p = &recs[k as usize - 1];
            worst_ratio = worst_ratio
                .max(rel((r.x[0] / p.x[0]).abs(), 2.0 / 3.0))
                .max(rel((r.x[1] / p.x[1]).abs(), 2.0 / 3.0))
                .max(rel(r.gap / p.gap, 4.0 / 9.0));
        }
    }
    let pass = recs.len() == 16 && worst_traj <= 1e-10 && worst_ratio <= 1e-10 && elapsed < Duration::from_millis(1);
    outcome(
        pass,
        format!(
            "max rel err vs exact {worst_traj:.2e}, max rel err of ratios {worst_ratio:.2e}, {:.3} ms",
            ms(elapsed)
        ),
    )
}

/// `min_{1≤k≤K} q(x^k)/κ` from the closed-form trajectory.
fn normalized_best_gap(gamma: f64, horizon: u64) -> f64 {
    let kappa = kappa_for_horizon(gamma, horizon).unwrap();
    let x0 = worstcase_initial_point(gamma, kappa, true).unwrap();
    (1..=horizon)
        .map(|k| exact_trajectory(gamma, kappa, x0, k).unwrap().1 / kappa)
        .fold(f64::INFINITY, f64::min)
}

fn c2_smooth_tightness() -> Outcome {
    let ((violations, min_margin), elapsed) = timed(|| {
        let mut v = 0;
        let mut m = f64::INFINITY;
        for gamma in [0.5, 1.0, 1.5] {
            for k in 1..=50 {
                let margin = normalized_best_gap(gamma, k) - lb_smooth(gamma, k);
                m = m.min(margin);
                if margin < 0.0 {
                    v += 1;
                }
            }
        }
        (v, m)
    });
    let at10 = lb_smooth(1.0, 10);
    let oracle = 1.0 / (62.0 * std::f64::consts::E.powi(2));
    let four_sig = |v: f64| (v * 1e6).round();
    let pass = violations == 0
        && rel(at10, oracle) < 1e-14
        && four_sig(at10) == four_sig(2.1832e-3)
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "violations {violations}, min margin {min_margin:.3e}, lb_smooth(1,10) = {at10:.6e}, {:.1} ms",
            ms(elapsed)
        ),
    )
}

fn c3_lemma_chain() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 1..=39 {
        let gamma = i as f64 / 10.0;
        for k in 1..=100 {
            let c = lemma_a1_margin(gamma, k);
            let m1 = (c.lhs - c.mid) / c.lhs.abs().max(c.mid.abs());
            let m2 = (c.mid - c.rhs) / c.mid.abs().max(c.rhs.abs());
            worst = worst.min(m1).min(m2);
            if m1 < -1e-14 || m2 < -1e-14 {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("violations {violations} of 3900, min relative margin {worst:.3e}"),
    )
}

fn c4_spectral_radii() -> Outcome {
    let ((r17, r2), elapsed) = timed(|| {
        let r17 = product_spectral_radius(1.0, 7.0).unwrap();
        let r2: Vec<f64> = [7.0, 10.0, 20.0, 50.0]
            .iter()
            .map(|k| product_spectral_radius(2.0, *k).unwrap())
            .collect();
        (r17, r2)
    });
    let e17 = (r17 - 1936.0 / 1296.0).abs();
    let e2 = r2.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        e17 <= 1e-9 && e2 <= 1e-9 && elapsed < Duration::from_millis(10),
        format!("rho(1,7) = {r17:.10}, err {e17:.1e}; max |rho(2,k) - 1| = {e2:.1e}; {:.2} ms", ms(elapsed)),
    )
}

fn c5_escape() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let (a, t) = timed(|| escape_experiment(1.0, 20.0, 200, 1e-12, 0).unwrap());
    pass &= a.escape_iteration.is_some() && a.final_gap_ratio < 0.1 && t < Duration::from_secs(1);
    parts.push(format!(
        "gamma=1: escape at {:?}, final ratio {:.2e}",
        a.escape_iteration, a.final_gap_ratio
    ));
    let (b, t) = timed(|| escape_experiment(2.0, 20.0, 200, 1e-12, 0).unwrap());
    pass &= (b.escape_iteration.is_none() || b.growth_rate <= 0.01) && t < Duration::from_secs(1);
    parts.push(format!("gamma=2: escape {:?}, growth {:.4}", b.escape_iteration, b.growth_rate));
    for kappa in [10.0, 20.0, 50.0] {
        let (r, t) = timed(|| escape_experiment(1.0, kappa, 200, 1e-12, 0).unwrap());
        let target = 0.5 * product_spectral_radius(1.0, kappa).unwrap().ln();
        let err = rel(r.growth_rate, target);
        pass &= err <= 0.2 && t < Duration::from_secs(1);
        parts.push(format!("kappa={kappa}: rate {:.3} vs {target:.3} ({:.0}%)", r.growth_rate, err * 100.0));
    }
    outcome(pass, parts.join("; "))
}

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn worse(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 > a.0 {
        b
    } else {
        a
    }
}

fn c6_huber() -> Outcome {
    let h = make_objective(&ObjectiveSpec::Huber { horizon: 1 }).unwrap();
    let mut pass = true;
    let mut worst_alpha = (0.0, 0);
    let mut worst_norm = (0.0, 0);
    let mut worst_contraction: f64 = 0.0;
    for x0 in [[1.0, 0.0], [0.6, 0.8]] {
        let cfg = RunConfig::new(1.0, 30).with_tolerances(0.0, 0.0);
        let trace = run(&h, &x0, &cfg).unwrap();
        let recs = trace.records();
        let a0 = recs[0].alpha.unwrap();
        worst_alpha = worse(worst_alpha, (rel(a0, 2.5), ulps(a0, 2.5)));
        let n1 = recs[1].x.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_norm = worse(worst_norm, (rel(n1, 1.0 / 6.0), ulps(n1, 1.0 / 6.0)));
        for w in recs[1..].windows(2) {
            let a = w[0].x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let b = w[1].x.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_contraction = worst_contraction.max(rel(b / a, 0.5));
        }
        pass &= recs.len() == 31;
    }
    // (0.6, 0.8) is not exactly on the unit circle in binary, so exactness
    // is checked to a few rounding errors rather than bit for bit.
    pass &= worst_alpha.0 <= 1e-15 && worst_norm.0 <= 1e-15 && worst_contraction <= 1e-14;
    outcome(
        pass,
        format!(
            "alpha0 rel err {:.1e} ({} ulp), |x1| rel err {:.1e} ({} ulp), max rel err of 1/2 contraction {worst_contraction:.1e}",
            worst_alpha.0, worst_alpha.1, worst_norm.0, worst_norm.1
        ),
    )
}

fn dominance_cases() -> Vec<(TestObjective, Vec<f64>)> {
    let hp = |nu: f64| {
        let kappa = 5.0;
        let core_gamma = 2.0 / (nu + 1.0);
        let x0 = worstcase_initial_point(core_gamma, kappa, true).unwrap().to_vec();
        (make_objective(&ObjectiveSpec::HolderPowerQ { kappa, l: 1.0, nu }).unwrap(), x0)
    };
    let a = polyak_lab::linalg::Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    vec![
        hp(0.5),
        hp(1.0),
        (make_objective(&ObjectiveSpec::Huber { horizon: 1 }).unwrap(), vec![0.6, 0.8]),
        (make_objective(&ObjectiveSpec::MatrixPower { a, nu: 0.5 }).unwrap(), vec![1.0, -1.0]),
    ]
}

fn c7_dominance() -> Outcome {
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for (obj, x0) in dominance_cases() {
        let d0 = obj.dist_to_solution(&x0).unwrap();
        let s = obj.smoothness().unwrap();
        let growth = obj.growth(d0).unwrap();
        let g_sup = obj.grad_sup_on_region(d0).unwrap();
        for gamma in [1.0, 2.0] {
            let trace = run(&obj, &x0, &RunConfig::new(gamma, 100).with_tolerances(0.0, 0.0)).unwrap();
            let recs = trace.records();
            for k in (2..=100u64).step_by(2) {
                let upto = (k as usize).min(recs.len() - 1);
                let end = (k as usize).min(recs.len());
                let best_gap = recs[1..=upto].iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
                let best_grad = recs[..end].iter().map(|r| r.grad_norm).fold(f64::INFINITY, f64::min);
                let params = BoundParams {
                    gamma: Some(gamma),
                    nu: Some(s.nu),
                    r: Some(growth.r),
                    l: Some(s.l_nu),
                    rho: Some(growth.rho),
                    horizon: Some(k),
                    dist0: Some(d0),
                    grad_sup: Some(g_sup),
                    ..Default::default()
                };
                let gap_kind = if gamma == 1.0 { BoundKind::UbGrowthLinear } else { BoundKind::Ub2Polyak };
                for (kind, observed) in [(gap_kind, best_gap), (BoundKind::UbGradnorm, best_grad)] {
                    let bound = upper_bound(&BoundQuery::new(kind, params.clone())).unwrap().value;
                    checks += 1;
                    if bound > 0.0 {
                        worst_ratio = worst_ratio.max(observed / bound);
                    }
                    if observed > bound * (1.0 + 1e-9) {
                        failures.push(format!("{} {} gamma={gamma} K={k}: {observed:.3e} > {bound:.3e}", obj.name(), kind));
                    }
                }
            }
        }
    }
    let mut detail = format!("{checks} checks, {} violations, max observed/bound {worst_ratio:.3}", failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    outcome(failures.is_empty(), detail)
}

fn c8_rate_fit() -> Outcome {
    let ((fits, smooth), elapsed) = timed(|| {
        let fits: Vec<(f64, f64)> = [0.5, 1.0]
            .iter()
            .map(|&nu| {
                let pts: Vec<(f64, f64)> = (10..=200u64)
                    .map(|k| (k as f64, holder_worstcase_gap(1.0, nu, 1.0, k).unwrap()))
                    .collect();
                (nu, rate_fit(&pts).unwrap().exponent)
            })
            .collect();
        let pts: Vec<(f64, f64)> = (10..=200u64).map(|k| (k as f64, normalized_best_gap(1.0, k))).collect();
        (fits, rate_fit(&pts).unwrap().exponent)
    });
    let mut pass = (smooth + 1.0).abs() <= 0.1 && elapsed < Duration::from_secs(1);
    let mut parts = Vec::new();
    for (nu, e) in &fits {
        let target = -(nu + 1.0) / 2.0;
        pass &= (e - target).abs() <= 0.1;
        parts.push(format!("nu={nu}: {e:.4} (target {target})"));
    }
    parts.push(format!("L-smooth: {smooth:.4} (target -1)"));
    parts.push(format!("{:.1} ms", ms(elapsed)));
    outcome(pass, parts.join(", "))
}

fn c9_envelope() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a0 = 10f64.powf(rng.random_range(-2.0..2.0));
        let tau = rng.random_range(1.05..3.0);
        let c = rng.random_range(0.01..0.99) / a0.powf(tau - 1.0);
        let mut a = a0;
        for k in 0..=1000u64 {
            let env = recursion_envelope(a0, c, tau, k).unwrap();
            worst = worst.max(a / env);
            if a > env * (1.0 + 1e-12) {
                violations += 1;
            }
            a = (a - c * a.powf(tau)).max(0.0);
        }
    }
    outcome(
        violations == 0,
        format!("violations {violations} over 100 triples x 1001 steps, max sequence/envelope {worst:.6}"),
    )
}

fn c10_stochastic() -> Outcome {
    let problem = InterpolatedLeastSquares::generate(20, 5, 0).unwrap();
    let x0 = vec![0.0; 5];
    let cfg = RunConfig::new(1.0, 200).with_tolerances(0.0, 0.0);
    let (ens, elapsed) = timed(|| stochastic_ensemble(&problem, &x0, &cfg, 1000, 1e-12).unwrap());
    let ratio = ens.mean_sq_dist[200] / ens.mean_sq_dist[0];
    outcome(
        ens.increases == 0 && ratio < 1e-6 && elapsed < Duration::from_secs(5),
        format!(
            "distance increases {}, mean sq dist ratio at k=200 {ratio:.3e} (need < 1e-6), {:.0} ms",
            ens.increases,
            ms(elapsed)
        ),
    )
}

fn c11_curvature() -> Outcome {
    let obj = make_objective(&ObjectiveSpec::ScaledQ { kappa: 4.0, l: 2.0 }).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [0.1, 1.0, 10.0] {
        let analytic = global_curvature(&obj, t, 0, 0);
        let empirical = global_curvature_empirical(&obj, t, 20_000, 11);
        let err = rel(empirical, analytic);
        pass &= rel(analytic, t * t) < 1e-15 && err <= 0.01;
        parts.push(format!("t={t}: rel err {err:.1e}"));
    }
    let x0 = worstcase_initial_point(1.0, 4.0, true).unwrap();
    let d0 = obj.dist_to_solution(&x0).unwrap();
    let trace = run(&obj, &x0, &RunConfig::new(1.0, 100_000).with_tolerances(0.0, 0.0)).unwrap();
    for eps in [1e-2, 1e-4] {
        let s = complexity_gauge(|t| global_curvature(&obj, t, 0, 0), eps).unwrap();
        let predicted = 9.0 * d0 * d0 / (s * s);
        let observed = trace.records()[1..].iter().find(|r| r.gap <= eps).map(|r| r.k);
        pass &= observed.is_some_and(|k| k as f64 <= predicted);
        parts.push(format!("eps={eps:e}: K_obs {observed:?} <= {predicted:.0}"));
    }
    outcome(pass, parts.join(", "))
}

const CLI_CASES: [(&str, &str); 8] = [
    ("run", "objective = quad_q\nkappa = 5\ngamma = 1\niters = 40\ndelta = 1e-6\nseed = 3\n"),
    ("worstcase", "gammas = 0.5,1\nK = 1..20\n"),
    ("dynamics", "gammas = 1,2\nkappas = 7,20\n"),
    ("escape", "gamma = 1\nkappa = 20\nK = 200\ndelta = 1e-12\nseed = 0\n"),
    ("bounds", "gammas = 0.5,1,1.5\nK = 1..50\n"),
    ("rates", "objective = holder_power_q\nnu = 0.5\nK = 10..60\n"),
    ("stochastic", "paths = 50\niters = 100\nseed = 5\n"),
    ("certify", "objective = matrix_power\nkinds = holder_smooth,holder_growth\nsamples = 2000\nseed = 2\n"),
];

fn kind_name(command: &str) -> &str {
    match command {
        "worstcase" => "worstcase_sweep",
        "dynamics" => "dynamics_scan",
        "bounds" => "bounds_table",
        other => other,
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn c12_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_polyak-lab");
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (cmd, body) in CLI_CASES {
        let cfg_path = tmp.path().join(format!("{cmd}.cfg"));
        fs::write(&cfg_path, format!("kind = {}\n{body}", kind_name(cmd))).unwrap();
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{cmd}-{rep}"));
            let status = Command::new(bin)
                .args([cmd, "--quiet", "--config"])
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            if !status.success() {
                mismatched.push(format!("{cmd} exited with {status}"));
            }
            outputs.push(read_dir_bytes(&out));
        }
        files += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatched.push(cmd.to_string());
        }
    }
    let mut svgs = Vec::new();
    for rep in 0..2 {
        let out = tmp.path().join(format!("plot-{rep}"));
        let status = Command::new(bin)
            .args(["plot", "--quiet", "--x", "k", "--y", "alpha", "--logy", "--csv"])
            .arg(tmp.path().join("escape-0/escape.csv"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        if !status.success() {
            mismatched.push("plot".into());
        }
        svgs.push(fs::read(out.join("escape.svg")).unwrap_or_default());
    }
    if svgs[0].is_empty() || svgs[0] != svgs[1] {
        mismatched.push("plot output".into());
    }
    outcome(
        mismatched.is_empty(),
        format!("{files} CSV files from 8 experiments plus one SVG compared; mismatches: {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("worst-case exactness", c1_worstcase_exactness),
        ("smooth-convex tightness", c2_smooth_tightness),
        ("lemma chain", c3_lemma_chain),
        ("spectral radii", c4_spectral_radii),
        ("escape", c5_escape),
        ("huber", c6_huber),
        ("upper-bound dominance", c7_dominance),
        ("rate fit", c8_rate_fit),
        ("recursion envelope", c9_envelope),
        ("stochastic polyak", c10_stochastic),
        ("global curvature", c11_curvature),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
