//! Experiment runner behind the `polyak-lab` binary.
//!
//! Each experiment kind reads its parameters from an [`ExperimentConfig`],
//! computes its tables in memory, rejects unknown keys, and only then writes
//! CSV files into the output directory.

pub mod config;
pub mod csv;
pub mod svg;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
use csv::Table;
pub use svg::{plot, PlotError, PlotSpec};

use crate::certify::{certify, CertificateKind, Region};
use crate::dynamics::{escape_experiment, stability_report};
use crate::linalg::Matrix;
use crate::objective::Objective;
use crate::optimizer::{best_iterate, run, stochastic_ensemble, RunConfig, DEFAULT_GRAD_TOL};
use crate::testbed::{
    exact_trajectory, holder_worstcase_gap, kappa_for_horizon, make_objective, worstcase_initial_point,
    InterpolatedLeastSquares, ObjectiveSpec, TestObjective,
};
use crate::theory::{lower_bound, rate_fit, upper_bound, BoundKind, BoundParams, BoundQuery, CurvatureFn, GcbVariant};

pub const TRACE_HEADER: &str = "k,alpha,gap,grad_norm,dist";
pub const ESCAPE_HEADER: &str = "k,alpha,gap,deviation";
pub const BOUNDS_HEADER: &str = "kind,gamma,nu,r,K,value";
pub const RATES_HEADER: &str = "K,min_gap,bound";
pub const RATES_FIT_HEADER: &str = "exponent,intercept,r_squared,target";
pub const CERTIFY_HEADER: &str = "kind,exponent,estimate,margin,samples,seed";
pub const WORSTCASE_HEADER: &str = "gamma,K,kappa,normalized_gap,lower_bound,margin";
pub const DYNAMICS_HEADER: &str = "gamma,kappa,rho,closed_form,stability";
pub const STOCHASTIC_HEADER: &str = "k,mean_sq_dist,min_dist,max_dist";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// Diagnostics from the numerical modules, passed through unchanged.
    #[error("{0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Plot(#[from] PlotError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) | CliError::Plot(_) => 1,
        }
    }
}

fn num(e: impl Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Files written and one summary line per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Output {
    tables: Vec<(&'static str, Table)>,
    summary: Vec<String>,
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Artifacts, CliError> {
    let output = match cfg.kind {
        ExperimentKind::Run => exp_run(cfg)?,
        ExperimentKind::WorstcaseSweep => exp_worstcase(cfg)?,
        ExperimentKind::DynamicsScan => exp_dynamics(cfg)?,
        ExperimentKind::Escape => exp_escape(cfg)?,
        ExperimentKind::BoundsTable => exp_bounds(cfg)?,
        ExperimentKind::Rates => exp_rates(cfg)?,
        ExperimentKind::Stochastic => exp_stochastic(cfg)?,
        ExperimentKind::Certify => exp_certify(cfg)?,
    };
    cfg.check_all_used()?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut files = Vec::new();
    for (name, table) in &output.tables {
        let path = out_dir.join(name);
        table.write(&path).map_err(|e| io_err(&path, e))?;
        files.push(path);
    }
    Ok(Artifacts {
        files,
        summary: output.summary,
    })
}

fn parse_matrix(cfg: &ExperimentConfig, key: &str, default: &str) -> Result<Matrix, CliError> {
    let text = cfg.str_or(key, default);
    let rows = text
        .split(';')
        .map(|r| config::parse_list(r).map_err(|m| cfg.error(key, m)))
        .collect::<Result<Vec<_>, _>>()?;
    Matrix::from_rows(&rows).ok_or_else(|| cfg.error(key, "rows must be nonempty and of equal length").into())
}

fn objective_spec(cfg: &ExperimentConfig) -> Result<ObjectiveSpec, CliError> {
    let name = cfg.str_or("objective", "quad_q");
    Ok(match name.as_str() {
        "quad_q" => ObjectiveSpec::QuadQ {
            kappa: cfg.f64_or("kappa", 5.0)?,
        },
        "scaled_q" => ObjectiveSpec::ScaledQ {
            kappa: cfg.f64_or("kappa", 5.0)?,
            l: cfg.f64_or("L", 1.0)?,
        },
        "holder_power_q" => ObjectiveSpec::HolderPowerQ {
            kappa: cfg.f64_or("kappa", 5.0)?,
            l: cfg.f64_or("L", 1.0)?,
            nu: cfg.f64_or("nu", 0.5)?,
        },
        "huber" => ObjectiveSpec::Huber {
            horizon: cfg.u64_or("huber_K", 1)?,
        },
        "matrix_power" => ObjectiveSpec::MatrixPower {
            a: parse_matrix(cfg, "A", "2,0.5;0.5,1")?,
            nu: cfg.f64_or("nu", 0.5)?,
        },
        "abs1d" => ObjectiveSpec::Abs1d,
        "interp_lsq" => ObjectiveSpec::InterpLsq {
            m: cfg.usize_or("m", 20)?,
            n: cfg.usize_or("n", 5)?,
            seed: cfg.u64_or("instance_seed", 0)?,
        },
        "nonconvex_rational" => ObjectiveSpec::NonconvexRational {
            dim: cfg.usize_or("dim", 2)?,
        },
        other => return Err(cfg.error("objective", format!("unknown objective '{other}'")).into()),
    })
}

fn build_objective(cfg: &ExperimentConfig) -> Result<(ObjectiveSpec, TestObjective), CliError> {
    let spec = objective_spec(cfg)?;
    let obj = make_objective(&spec).map_err(num)?;
    Ok((spec, obj))
}

/// Starting point: `worstcase_unit`, `worstcase` (with `x₁ = 1`), or a
/// comma-separated vector.
fn initial_point(cfg: &ExperimentConfig, spec: &ObjectiveSpec, obj: &TestObjective, gamma: f64) -> Result<Vec<f64>, CliError> {
    let quad_kappa = match spec {
        ObjectiveSpec::QuadQ { kappa } | ObjectiveSpec::ScaledQ { kappa, .. } => Some((*kappa, gamma)),
        ObjectiveSpec::HolderPowerQ { kappa, nu, .. } => Some((*kappa, 2.0 * gamma / (nu + 1.0))),
        _ => None,
    };
    let default = if quad_kappa.is_some() { "worstcase_unit" } else { "ones" };
    let text = cfg.str_or("x0", default);
    match text.as_str() {
        "worstcase_unit" | "worstcase" => {
            let (kappa, g) = quad_kappa.ok_or_else(|| cfg.error("x0", "worst-case starts need a quadratic-family objective"))?;
            Ok(worstcase_initial_point(g, kappa, text == "worstcase_unit").map_err(num)?.to_vec())
        }
        "ones" => Ok(vec![1.0; obj.dim()]),
        list => {
            let x = config::parse_list(list).map_err(|m| cfg.error("x0", m))?;
            if x.len() != obj.dim() {
                return Err(cfg
                    .error("x0", format!("expected {} components, got {}", obj.dim(), x.len()))
                    .into());
            }
            Ok(x)
        }
    }
}

fn exp_run(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let (spec, obj) = build_objective(cfg)?;
    let gamma = cfg.f64_or("gamma", 1.0)?;
    let x0 = initial_point(cfg, &spec, &obj, gamma)?;
    let config = RunConfig::new(gamma, cfg.usize_or("iters", 100)?)
        .with_noise(cfg.f64_or("delta", 0.0)?, cfg.u64_or("seed", 0)?)
        .with_tolerances(cfg.f64_or("grad_tol", DEFAULT_GRAD_TOL)?, cfg.f64_or("gap_tol", 0.0)?);
    let config = if cfg.bool_or("extended_gamma", false)? {
        config.with_extended_gamma()
    } else {
        config
    };
    let trace = run(&obj, &x0, &config).map_err(num)?;
    let mut table = Table::new(TRACE_HEADER);
    for r in trace.records() {
        table.push(vec![r.k.into(), r.alpha.into(), r.gap.into(), r.grad_norm.into(), r.dist.into()]);
    }
    let best = match best_iterate(&trace) {
        Ok((k, gap)) => format!("best_gap={gap:e} at k={k}"),
        Err(_) => "best_gap=none".to_string(),
    };
    Ok(Output {
        tables: vec![("trace.csv", table)],
        summary: vec![format!(
            "run: objective={} gamma={gamma} iterations={} stop={} {best}",
            obj.name(),
            trace.iterations(),
            trace.stop_reason()
        )],
    })
}

/// Best normalised gap `min_{1≤k≤K} q(x^k)/κ` on the worst case tuned to `K`.
fn worstcase_best_gap(gamma: f64, horizon: u64) -> Result<(f64, f64), CliError> {
    let kappa = kappa_for_horizon(gamma, horizon).map_err(num)?;
    let x0 = worstcase_initial_point(gamma, kappa, true).map_err(num)?;
    let mut best = f64::INFINITY;
    for k in 1..=horizon {
        let (_, gap) = exact_trajectory(gamma, kappa, x0, k).map_err(num)?;
        best = best.min(gap / kappa);
    }
    Ok((kappa, best))
}

fn exp_worstcase(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let gammas = cfg.f64_list_or("gammas", &[0.5, 1.0, 1.5])?;
    let horizons = cfg.u64_list_or("K", &(1..=50).collect::<Vec<_>>())?;
    let grid: Vec<(f64, u64)> = gammas.iter().flat_map(|g| horizons.iter().map(move |k| (*g, *k))).collect();
    let rows = grid
        .par_iter()
        .map(|&(g, k)| {
            let (kappa, gap) = worstcase_best_gap(g, k)?;
            let lb = lower_bound(&BoundQuery::new(
                BoundKind::LbSmooth,
                BoundParams {
                    gamma: Some(g),
                    horizon: Some(k),
                    ..Default::default()
                },
            ))
            .map_err(num)?
            .value;
            Ok((g, k, kappa, gap, lb))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(WORSTCASE_HEADER);
    let mut worst = f64::INFINITY;
    for (g, k, kappa, gap, lb) in &rows {
        worst = worst.min(gap - lb);
        table.push(vec![(*g).into(), (*k).into(), (*kappa).into(), (*gap).into(), (*lb).into(), (gap - lb).into()]);
    }
    let violations = rows.iter().filter(|r| r.3 < r.4).count();
    Ok(Output {
        tables: vec![("worstcase.csv", table)],
        summary: vec![format!(
            "worstcase_sweep: points={} violations={violations} min_margin={worst:e}",
            rows.len()
        )],
    })
}

fn rho_closed_form(gamma: f64, kappa: f64) -> Option<f64> {
    if gamma == 1.0 {
        let p = kappa * kappa - 4.0 * kappa + 1.0;
        Some(4.0 * p * p / (kappa - 1.0).powi(4))
    } else if gamma == 2.0 {
        Some(1.0)
    } else {
        None
    }
}

fn exp_dynamics(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let gammas = cfg.f64_list_or("gammas", &[1.0, 2.0])?;
    let kappas = cfg.f64_list_or("kappas", &[7.0, 10.0, 20.0, 50.0])?;
    let mut table = Table::new(DYNAMICS_HEADER);
    let mut unstable = 0;
    for &g in &gammas {
        for &k in &kappas {
            let rep = stability_report(g, k).map_err(num)?;
            if rep.stability == crate::dynamics::Stability::Unstable {
                unstable += 1;
            }
            table.push(vec![
                g.into(),
                k.into(),
                rep.rho.into(),
                rho_closed_form(g, k).into(),
                rep.stability.as_str().into(),
            ]);
        }
    }
    Ok(Output {
        tables: vec![("dynamics.csv", table)],
        summary: vec![format!(
            "dynamics_scan: points={} unstable={unstable}",
            gammas.len() * kappas.len()
        )],
    })
}

fn exp_escape(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let gamma = cfg.f64_or("gamma", 1.0)?;
    let kappa = cfg.f64_or("kappa", 20.0)?;
    let horizon = cfg.usize_or("K", 200)?;
    let delta = cfg.f64_or("delta", 1e-12)?;
    let seed = cfg.u64_or("seed", 0)?;
    let rep = escape_experiment(gamma, kappa, horizon, delta, seed).map_err(num)?;
    let mut table = Table::new(ESCAPE_HEADER);
    for r in &rep.rows {
        table.push(vec![r.k.into(), r.alpha.into(), r.gap.into(), r.deviation.into()]);
    }
    let esc = rep.escape_iteration.map_or("none".to_string(), |k| k.to_string());
    Ok(Output {
        tables: vec![("escape.csv", table)],
        summary: vec![format!(
            "escape: gamma={gamma} kappa={kappa} K={horizon} delta={delta:e} escape_iteration={esc} growth_rate={:.6} final_gap_ratio={:e}",
            rep.growth_rate, rep.final_gap_ratio
        )],
    })
}

fn exp_bounds(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let kinds = cfg
        .str_or("kinds", "lb_smooth,lb_holder,lb_gradnorm")
        .split(',')
        .map(|s| s.trim().parse::<BoundKind>().map_err(|m| cfg.error("kinds", m)))
        .collect::<Result<Vec<_>, _>>()?;
    let gammas = cfg.f64_list_or("gammas", &[0.5, 1.0, 1.5])?;
    let nus = cfg.f64_list_or("nus", &[1.0])?;
    let horizons = cfg.u64_list_or("K", &(1..=50).collect::<Vec<_>>())?;
    let r_fixed = cfg.f64_opt("r")?;
    let l = cfg.f64_or("L", 1.0)?;
    let d0 = cfg.f64_or("D0", 1.0)?;
    let rho = cfg.f64_or("rho", 0.25)?;
    let g_sup = cfg.f64_or("G", 1.0)?;
    let kappa = cfg.f64_or("kappa", 5.0)?;
    let variant = match cfg.str_or("gcb_variant", "linear").as_str() {
        "linear" => GcbVariant::Linear,
        "squared" => GcbVariant::Squared,
        other => return Err(cfg.error("gcb_variant", format!("expected linear or squared, got '{other}'")).into()),
    };
    // Global curvature of an L-smooth quadratic with top eigenvalue L.
    let curvature = CurvatureFn::new(move |t| l * t * t / 2.0);

    let mut table = Table::new(BOUNDS_HEADER);
    for kind in &kinds {
        let uses_gamma = !matches!(kind, BoundKind::LbStrong | BoundKind::Ub2Polyak);
        let uses_nu = !matches!(kind, BoundKind::LbStrong | BoundKind::LbSmooth | BoundKind::UbGcb);
        let uses_r = matches!(kind, BoundKind::UbGrowthLinear | BoundKind::UbGrowthSublinear);
        let g_list: Vec<Option<f64>> = if uses_gamma { gammas.iter().map(|g| Some(*g)).collect() } else { vec![None] };
        let n_list: Vec<Option<f64>> = if uses_nu { nus.iter().map(|n| Some(*n)).collect() } else { vec![None] };
        for g in &g_list {
            for nu in &n_list {
                let r = uses_r.then(|| r_fixed.unwrap_or(nu.unwrap_or(1.0) + 1.0));
                for &k in &horizons {
                    let params = BoundParams {
                        gamma: *g,
                        nu: *nu,
                        r,
                        kappa: Some(kappa),
                        l: Some(l),
                        rho: Some(rho),
                        horizon: Some(k),
                        dist0: Some(d0),
                        grad_sup: Some(g_sup),
                        curvature: Some(curvature.clone()),
                        gcb_variant: variant,
                    };
                    let q = BoundQuery::new(*kind, params);
                    let v = if kind.is_lower() { lower_bound(&q) } else { upper_bound(&q) }.map_err(num)?;
                    table.push(vec![kind.as_str().into(), (*g).into(), (*nu).into(), r.into(), k.into(), v.value.into()]);
                }
            }
        }
    }
    let n = table.rows().len();
    Ok(Output {
        tables: vec![("bounds.csv", table)],
        summary: vec![format!("bounds_table: kinds={} rows={n}", kinds.len())],
    })
}

fn exp_rates(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let objective = cfg.str_or("objective", "holder_power_q");
    let nu = match objective.as_str() {
        "holder_power_q" => cfg.f64_or("nu", 0.5)?,
        "scaled_q" | "quad_q" => 1.0,
        other => {
            return Err(cfg
                .error("objective", format!("rates support holder_power_q, scaled_q or quad_q, got '{other}'"))
                .into())
        }
    };
    let gamma = cfg.f64_or("gamma", 1.0)?;
    let l = cfg.f64_or("L", 1.0)?;
    let horizons = cfg.u64_list_or("K", &(10..=200).collect::<Vec<_>>())?;
    let source = cfg.str_or("source", "exact");
    if source != "exact" && source != "run" {
        return Err(cfg.error("source", "expected exact or run").into());
    }
    let (bound_kind, target) = if nu == 1.0 {
        (BoundKind::LbSmooth, -1.0)
    } else {
        (BoundKind::LbHolder, -(nu + 1.0) / 2.0)
    };
    let rows = horizons
        .par_iter()
        .map(|&k| {
            let gap = if source == "exact" {
                holder_worstcase_gap(gamma, nu, l, k).map_err(num)?
            } else {
                simulated_worstcase_gap(gamma, nu, l, k)?
            };
            let bound = lower_bound(&BoundQuery::new(
                bound_kind,
                BoundParams {
                    gamma: Some(gamma),
                    nu: Some(nu),
                    horizon: Some(k),
                    ..Default::default()
                },
            ))
            .map_err(num)?
            .value;
            Ok((k, gap, bound))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(RATES_HEADER);
    for (k, gap, bound) in &rows {
        table.push(vec![(*k).into(), (*gap).into(), (*bound).into()]);
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|(k, g, _)| (*k as f64, *g)).collect();
    let fit = rate_fit(&pts).map_err(num)?;
    let mut fit_table = Table::new(RATES_FIT_HEADER);
    fit_table.push(vec![fit.exponent.into(), fit.intercept.into(), fit.r_squared.into(), target.into()]);
    Ok(Output {
        tables: vec![("rates.csv", table), ("rates_fit.csv", fit_table)],
        summary: vec![format!(
            "rates: objective={objective} nu={nu} exponent={:.6} target={target} r_squared={:.6}",
            fit.exponent, fit.r_squared
        )],
    })
}

/// Same quantity as [`holder_worstcase_gap`] but from an actual δ = 0 run.
fn simulated_worstcase_gap(gamma: f64, nu: f64, l: f64, horizon: u64) -> Result<f64, CliError> {
    let core_gamma = 2.0 * gamma / (nu + 1.0);
    let kappa = kappa_for_horizon(core_gamma, horizon).map_err(num)?;
    let x0 = worstcase_initial_point(core_gamma, kappa, true).map_err(num)?;
    let obj = make_objective(&ObjectiveSpec::HolderPowerQ { kappa, l, nu }).map_err(num)?;
    let trace = run(&obj, &x0, &RunConfig::new(gamma, horizon as usize)).map_err(num)?;
    let (_, best) = best_iterate(&trace).map_err(num)?;
    Ok(best / obj.smoothness().map_or(1.0, |s| s.l_nu))
}

fn exp_stochastic(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let m = cfg.usize_or("m", 20)?;
    let n = cfg.usize_or("n", 5)?;
    let problem = InterpolatedLeastSquares::generate(m, n, cfg.u64_or("instance_seed", 0)?).map_err(num)?;
    let x0 = match cfg.str_opt("x0") {
        None => vec![0.0; n],
        Some(s) => {
            let x = config::parse_list(&s).map_err(|e| cfg.error("x0", e))?;
            if x.len() != n {
                return Err(cfg.error("x0", format!("expected {n} components")).into());
            }
            x
        }
    };
    let paths = cfg.usize_or("paths", 1000)?;
    let gamma = cfg.f64_or("gamma", 1.0)?;
    let config = RunConfig::new(gamma, cfg.usize_or("iters", 200)?)
        .with_noise(0.0, cfg.u64_or("seed", 0)?)
        .with_tolerances(0.0, 0.0);
    let ens = stochastic_ensemble(&problem, &x0, &config, paths, cfg.f64_or("slack", 1e-12)?).map_err(num)?;
    let mut table = Table::new(STOCHASTIC_HEADER);
    for k in 0..ens.mean_sq_dist.len() {
        table.push(vec![k.into(), ens.mean_sq_dist[k].into(), ens.min_dist[k].into(), ens.max_dist[k].into()]);
    }
    let ratio = ens.mean_sq_dist.last().copied().unwrap_or(f64::NAN) / ens.mean_sq_dist[0];
    Ok(Output {
        tables: vec![("stochastic.csv", table)],
        summary: vec![format!(
            "stochastic: m={m} n={n} paths={paths} gamma={gamma} final_ratio={ratio:e} increases={}",
            ens.increases
        )],
    })
}

fn exp_certify(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let (_, obj) = build_objective(cfg)?;
    let kinds = cfg
        .str_or("kinds", "holder_smooth")
        .split(',')
        .map(|s| s.trim().parse::<CertificateKind>().map_err(|m| cfg.error("kinds", m)))
        .collect::<Result<Vec<_>, _>>()?;
    let radius = cfg.f64_or("radius", 1.0)?;
    let center = obj.minimizer().unwrap_or_else(|| vec![0.0; obj.dim()]);
    let region = Region::new(center, radius).map_err(num)?;
    let exponent = cfg.f64_opt("exponent")?;
    let claimed = cfg.f64_opt("constant")?;
    let samples = cfg.usize_or("samples", 10_000)?;
    let seed = cfg.u64_or("seed", 0)?;
    let mut table = Table::new(CERTIFY_HEADER);
    let mut failed = 0;
    for kind in &kinds {
        let e = exponent.unwrap_or_else(|| match kind {
            CertificateKind::HolderGrowth => obj.growth(radius).map_or(2.0, |g| g.r),
            CertificateKind::StarConvex => 1.0,
            _ => obj.smoothness().map_or(1.0, |s| s.nu),
        });
        let rep = certify(*kind, &obj, &region, e, claimed, samples, seed).map_err(num)?;
        if !rep.certified() {
            failed += 1;
        }
        table.push(vec![
            kind.as_str().into(),
            e.into(),
            rep.estimate.into(),
            rep.margin.into(),
            samples.into(),
            seed.into(),
        ]);
    }
    Ok(Output {
        tables: vec![("certify.csv", table)],
        summary: vec![format!(
            "certify: objective={} kinds={} violated={failed}",
            obj.name(),
            kinds.len()
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn escape_writes_schema_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let art = run_experiment(&cfg("kind = escape\ngamma = 1\nkappa = 20\nK = 200\ndelta = 1e-12\n"), dir.path()).unwrap();
        let text = fs::read_to_string(&art.files[0]).unwrap();
        assert!(text.starts_with("k,alpha,gap,deviation\n"));
        assert_eq!(text.lines().count(), 202);
        assert!(art.summary[0].contains("escape_iteration="));
        assert!(!art.summary[0].contains("escape_iteration=none"));
    }

    #[test]
    fn rates_report_target() {
        let dir = tempfile::tempdir().unwrap();
        let art = run_experiment(&cfg("kind = rates\nobjective = holder_power_q\nnu = 0.5\n"), dir.path()).unwrap();
        let fit = fs::read_to_string(dir.path().join("rates_fit.csv")).unwrap();
        let row: Vec<f64> = fit.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[3], -0.75);
        assert!((row[0] + 0.75).abs() < 0.1);
        assert!(art.summary[0].contains("target=-0.75"));
    }

    #[test]
    fn unknown_key_is_config_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let err = run_experiment(&cfg("kind = escape\nkapa = 20\n"), &out).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2, key 'kapa'"));
        assert!(!out.exists());
    }

    #[test]
    fn domain_error_is_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_experiment(&cfg("kind = escape\ngamma = 1\nkappa = 2\n"), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("not admissible"));
    }

    #[test]
    fn bounds_table_has_header() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg("kind = bounds_table\nK = 1..3\n"), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
        assert!(text.starts_with("kind,gamma,nu,r,K,value\n"));
        // 3 kinds: lb_smooth 3 gammas, lb_holder and lb_gradnorm 3 gammas × 1 nu; 3 horizons each.
        assert_eq!(text.lines().count(), 1 + 27);
    }

    #[test]
    fn certify_row() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(
            &cfg("kind = certify\nobjective = quad_q\nkappa = 5\nkinds = holder_smooth,holder_growth\nsamples = 500\n"),
            dir.path(),
        )
        .unwrap();
        let text = fs::read_to_string(dir.path().join("certify.csv")).unwrap();
        assert!(text.starts_with("kind,exponent,estimate,margin,samples,seed\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
