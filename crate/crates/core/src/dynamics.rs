//! γ-PolyakGD on the worst-case quadratic viewed as a map on
//! `s = (x/‖z‖, y/‖z‖, α)`, where `α` is the scaled step taken from `z`.

use thiserror::Error;

use crate::optimizer::{run, OptimError, RunConfig};
use crate::spectral::{mat3_mul, spectral_radius3, Mat3};
use crate::testbed::{check_admissible, exact_trajectory, make_objective, worstcase_initial_point, ObjectiveSpec, TestbedError};

/// `|ρ − 1|` below this counts as marginal.
pub const STABILITY_TOL: f64 = 1e-9;

/// Relative stepsize deviation that counts as having left the orbit.
pub const ESCAPE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("singular state: the next iterate vanishes (u = {u}, v = {v}, alpha = {alpha})")]
    Singular { u: f64, v: f64, alpha: f64 },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Testbed(#[from] TestbedError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitState {
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

impl OrbitState {
    pub fn new(u: f64, v: f64, alpha: f64) -> Self {
        Self { u, v, alpha }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.u, self.v, self.alpha]
    }

    pub fn max_abs_diff(&self, other: &OrbitState) -> f64 {
        (self.u - other.u)
            .abs()
            .max((self.v - other.v).abs())
            .max((self.alpha - other.alpha).abs())
    }
}

fn singular(s: &OrbitState) -> DynamicsError {
    DynamicsError::Singular {
        u: s.u,
        v: s.v,
        alpha: s.alpha,
    }
}

/// One step of the normalised map.
pub fn map_step(gamma: f64, kappa: f64, s: OrbitState) -> Result<OrbitState, DynamicsError> {
    let a = 1.0 - s.alpha * kappa;
    let b = 1.0 - s.alpha;
    let au2 = a * a * s.u * s.u;
    let bv2 = b * b * s.v * s.v;
    let d2 = au2 + bv2;
    if !(d2 > 0.0) || !d2.is_finite() {
        return Err(singular(&s));
    }
    let d = d2.sqrt();
    Ok(OrbitState {
        u: a * s.u / d,
        v: b * s.v / d,
        alpha: gamma / 2.0 * (kappa * au2 + bv2) / (kappa * kappa * au2 + bv2),
    })
}

fn check_gamma(gamma: f64, hi: f64) -> Result<(), DynamicsError> {
    if gamma > 0.0 && gamma <= hi {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must lie in (0, 2]",
        })
    }
}

/// Smallest κ (exclusive) admitting the period-2 orbit: `max{4/γ − 1, 3 + 2√2}`.
pub fn orbit_kappa_bound(gamma: f64) -> f64 {
    (4.0 / gamma - 1.0).max(3.0 + 2.0 * 2f64.sqrt())
}

/// The period-2 orbit `s₁ = (u, v, 2/(κ+1))`, `s₂ = (−u, v, 2/(κ+1))` with
/// `u > 0`.
pub fn period2_orbit(gamma: f64, kappa: f64) -> Result<(OrbitState, OrbitState), DynamicsError> {
    check_gamma(gamma, 2.0)?;
    if !(kappa > orbit_kappa_bound(gamma)) || !kappa.is_finite() {
        return Err(DynamicsError::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "must exceed max(4/gamma - 1, 3 + 2 sqrt 2)",
        });
    }
    let denom = (4.0 - gamma) * (kappa * kappa - 1.0);
    let u = ((gamma * (kappa + 1.0) - 4.0) / denom).sqrt();
    let v = (kappa * (4.0 * kappa - gamma * kappa - gamma) / denom).sqrt();
    let alpha = 2.0 / (kappa + 1.0);
    Ok((OrbitState::new(u, v, alpha), OrbitState::new(-u, v, alpha)))
}

/// Closed-form Jacobian of [`map_step`] with respect to `(u, v, α)`.
pub fn jacobian(gamma: f64, kappa: f64, s: OrbitState) -> Result<Mat3, DynamicsError> {
    let (x, y, al, k, g) = (s.u, s.v, s.alpha, kappa, gamma);
    let a1 = al - 1.0;
    let ak1 = al * k - 1.0;
    let d2 = (x - al * k * x).powi(2) + (y - al * y).powi(2);
    if !(d2 > 0.0) || !d2.is_finite() {
        return Err(singular(&s));
    }
    let sd = d2 * d2.sqrt();
    let w = k * k * x * x * ak1 * ak1 + a1 * a1 * y * y;
    let dd = w * w;
    let jac = [
        [
            -a1 * a1 * y * y * ak1 / sd,
            a1 * a1 * x * y * ak1 / sd,
            a1 * (k - 1.0) * x * y * y / sd,
        ],
        [
            a1 * x * y * ak1 * ak1 / sd,
            -a1 * x * x * ak1 * ak1 / sd,
            -(k - 1.0) * x * x * y * ak1 / sd,
        ],
        [
            -a1 * a1 * g * (k - 1.0) * k * x * y * y * ak1 * ak1 / dd,
            a1 * a1 * g * (k - 1.0) * k * x * x * y * ak1 * ak1 / dd,
            a1 * g * (k - 1.0) * (k - 1.0) * k * x * x * y * y * ak1 / dd,
        ],
    ];
    if jac.iter().flatten().any(|v| !v.is_finite()) {
        return Err(singular(&s));
    }
    Ok(jac)
}

/// Spectral radius of `J(s₁)·J(s₂)` on the period-2 orbit.
pub fn product_spectral_radius(gamma: f64, kappa: f64) -> Result<f64, DynamicsError> {
    let (s1, s2) = period2_orbit(gamma, kappa)?;
    let m = mat3_mul(&jacobian(gamma, kappa, s1)?, &jacobian(gamma, kappa, s2)?);
    Ok(spectral_radius3(&m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Unstable,
    Marginal,
    Stable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
            Stability::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub rho: f64,
    pub stability: Stability,
}

pub fn classify(rho: f64) -> Stability {
    if (rho - 1.0).abs() <= STABILITY_TOL {
        Stability::Marginal
    } else if rho > 1.0 {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

pub fn stability_report(gamma: f64, kappa: f64) -> Result<StabilityReport, DynamicsError> {
    let rho = product_spectral_radius(gamma, kappa)?;
    Ok(StabilityReport {
        rho,
        stability: classify(rho),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeRow {
    pub k: usize,
    /// Unscaled Polyak stepsize `Δ_k/‖∇q(x^k)‖²`.
    pub alpha: f64,
    pub gap: f64,
    /// `α_k − 2/(γ(κ+1))`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeReport {
    pub gamma: f64,
    pub kappa: f64,
    /// First `k` with `|α_k γ(κ+1)/2 − 1| > 0.1`.
    pub escape_iteration: Option<usize>,
    /// Least-squares slope of `ln|α_k − 2/(γ(κ+1))|` against `k` before escape.
    pub growth_rate: f64,
    /// Gap at the last iterate over the exact worst-case gap at the same `k`.
    pub final_gap_ratio: f64,
    pub rows: Vec<EscapeRow>,
}

/// Orbit stepsize `2/(γ(κ+1))` in unscaled form.
pub fn orbit_stepsize(gamma: f64, kappa: f64) -> f64 {
    2.0 / (gamma * (kappa + 1.0))
}

/// Runs γ-PolyakGD with relative stepsize noise `δ` from the unit-sphere
/// worst-case start and measures how quickly it leaves the orbit.
pub fn escape_experiment(
    gamma: f64,
    kappa: f64,
    horizon: usize,
    noise_delta: f64,
    seed: u64,
) -> Result<EscapeReport, DynamicsError> {
    check_gamma(gamma, 2.0)?;
    check_admissible(gamma, kappa)?;
    if horizon < 20 {
        return Err(DynamicsError::InvalidParameter {
            name: "K",
            value: horizon as f64,
            reason: "must be at least 20",
        });
    }
    let q = make_objective(&ObjectiveSpec::QuadQ { kappa })?;
    let x0 = worstcase_initial_point(gamma, kappa, true)?;
    // No gradient tolerance: the comparison is made at the horizon itself.
    let config = RunConfig::new(gamma, horizon)
        .with_noise(noise_delta, seed)
        .with_tolerances(0.0, 0.0);
    let trace = run(&q, &x0, &config)?;
    let target = orbit_stepsize(gamma, kappa);
    let rows: Vec<EscapeRow> = trace
        .records()
        .iter()
        .map(|r| {
            let alpha = r.alpha.unwrap_or(f64::NAN);
            EscapeRow {
                k: r.k,
                alpha,
                gap: r.gap,
                deviation: alpha - target,
            }
        })
        .collect();
    let last = trace.last();
    let (_, exact_gap) = exact_trajectory(gamma, kappa, x0, last.k as u64)?;
    Ok(summarize(gamma, kappa, rows, last.gap / exact_gap))
}

fn summarize(gamma: f64, kappa: f64, rows: Vec<EscapeRow>, final_gap_ratio: f64) -> EscapeReport {
    let escape_iteration = rows
        .iter()
        .find(|r| !(((r.alpha / orbit_stepsize(gamma, kappa)) - 1.0).abs() <= ESCAPE_THRESHOLD))
        .map(|r| r.k);
    let window = escape_iteration.unwrap_or(usize::MAX);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k < window && r.deviation != 0.0 && r.deviation.is_finite())
        .map(|r| (r.k as f64, r.deviation.abs().ln()))
        .collect();
    EscapeReport {
        gamma,
        kappa,
        escape_iteration,
        growth_rate: linear_slope(&pts),
        final_gap_ratio,
        rows,
    }
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Escape analysis on the closed-form trajectory, where every stepsize is
/// exactly the orbit value.
pub fn analyze_stepsizes(gamma: f64, kappa: f64, horizon: usize) -> Result<EscapeReport, DynamicsError> {
    check_gamma(gamma, 2.0)?;
    let x0 = worstcase_initial_point(gamma, kappa, true)?;
    let target = orbit_stepsize(gamma, kappa);
    let rows = (0..=horizon)
        .map(|k| {
            let (_, gap) = exact_trajectory(gamma, kappa, x0, k as u64)?;
            Ok(EscapeRow {
                k,
                alpha: target,
                gap,
                deviation: target - orbit_stepsize(gamma, kappa),
            })
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Ok(summarize(gamma, kappa, rows, 1.0))
}
