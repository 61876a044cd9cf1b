//! Sampled checks of regularity inequalities on a ball.
//!
//! Samples come from a Halton sequence with a seeded Cranley–Patterson
//! shift, mapped radially from the cube onto the ball. Empirical constants
//! are extrema over the sample and so only bound the true suprema from one
//! side: a certificate can expose a wrong claimed constant, never prove a
//! tight one.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{axpy, dist, dot, norm, sub};
use crate::objective::Objective;

/// Samples evaluated per parallel task. Fixed so that reductions do not
/// depend on the thread count.
const CHUNK: usize = 256;

/// Stepsize grid for the curvature supremum.
pub const ALPHA_GRID: [f64; 11] = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("region radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("region center has dimension {got}, objective has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exponent {value} outside the legal domain {domain}")]
    InvalidExponent { value: f64, domain: &'static str },
    #[error("growth exponent r = {r} is below nu + 1 = {} for this objective's nu = {nu}", nu + 1.0)]
    Incompatible { r: f64, nu: f64 },
    #[error("objective {0} has no closed-form distance to its solution set")]
    NoDistance(String),
    #[error("sample count must be positive")]
    NoSamples,
    #[error("claimed constant must be positive and finite, got {0}")]
    InvalidClaim(f64),
    #[error("no sampled point gave a usable ratio (all samples degenerate)")]
    Degenerate,
    #[error("epsilon = {eps} is outside the range of the curvature function on [{lo:e}, {hi:e}]")]
    Bracketing { eps: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    center: Vec<f64>,
    radius: f64,
}

impl Region {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, CertifyError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(CertifyError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// The ball around `x⋆` through `x⁰`.
    pub fn fejer(x_star: &[f64], x0: &[f64]) -> Result<Self, CertifyError> {
        Self::new(x_star.to_vec(), dist(x_star, x0))
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    HolderSmooth,
    HolderGrowth,
    StarConvex,
    Cocoercive,
    SmoothIneq,
}

impl CertificateKind {
    pub const ALL: [CertificateKind; 5] = [
        CertificateKind::HolderSmooth,
        CertificateKind::HolderGrowth,
        CertificateKind::StarConvex,
        CertificateKind::Cocoercive,
        CertificateKind::SmoothIneq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::HolderSmooth => "holder_smooth",
            CertificateKind::HolderGrowth => "holder_growth",
            CertificateKind::StarConvex => "star_convex",
            CertificateKind::Cocoercive => "cocoercive",
            CertificateKind::SmoothIneq => "smooth_ineq",
        }
    }
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CertificateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CertificateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown certificate kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub exponent: f64,
    /// `L_ν` (largest implied ratio), `ρ_r` (smallest ratio), or for
    /// star-convexity the smallest `⟨∇f(x), x − x⋆⟩ / (f(x) − f⋆)`.
    pub estimate: f64,
    /// Largest relative violation `(lhs − rhs)/max(|lhs|, |rhs|)` of the
    /// defining inequality `lhs ≤ rhs`; ≤ 0 means no sampled violation.
    pub margin: f64,
    /// Constant the margin was measured against.
    pub constant: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl CertificateReport {
    pub fn certified(&self) -> bool {
        self.margin <= 0.0
    }
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Shifted Halton sequence in `[0, 1)^dim`.
pub struct Halton {
    bases: Vec<u64>,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            bases: first_primes(dim),
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    /// Point `index` (the first point is index 0; the all-zero Halton point
    /// is skipped).
    pub fn point(&self, index: usize) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.shift)
            .map(|(b, s)| {
                let v = radical_inverse(index as u64 + 1, *b) + s;
                v - v.floor()
            })
            .collect()
    }
}

/// Radial map from `[0, 1)^d` onto the closed unit ball: the cube point is
/// recentred to `[−1, 1)^d` and scaled by `‖p‖_∞/‖p‖₂`.
pub fn cube_to_ball(p: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = p.iter().map(|v| 2.0 * v - 1.0).collect();
    let l2 = norm(&c);
    if l2 == 0.0 {
        return c;
    }
    let linf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    c.iter().map(|v| v * linf / l2).collect()
}

fn in_ball(p: &[f64], region: &Region) -> Vec<f64> {
    axpy(&region.center, region.radius, &cube_to_ball(p))
}

fn rel_violation(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs) / scale
    }
}

/// What one sample contributes: a ratio for the estimate (if defined) and
/// the sides of the inequality against the claimed constant.
#[derive(Clone, Copy)]
struct Sample {
    ratio: Option<f64>,
    violation: f64,
}

#[derive(Clone, Copy)]
struct Acc {
    best: Option<f64>,
    margin: f64,
}

fn sweep(samples: usize, maximize: bool, eval: impl Fn(usize) -> Sample + Sync) -> Acc {
    let chunks = samples.div_ceil(CHUNK);
    let pick = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(if maximize { x.max(y) } else { x.min(y) }),
        (x, None) => x,
        (None, y) => y,
    };
    let partial: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc {
                best: None,
                margin: f64::NEG_INFINITY,
            };
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let s = eval(i);
                acc.best = pick(acc.best, s.ratio.filter(|r| r.is_finite()));
                acc.margin = acc.margin.max(s.violation);
            }
            acc
        })
        .collect();
    partial.into_iter().fold(
        Acc {
            best: None,
            margin: f64::NEG_INFINITY,
        },
        |a, b| Acc {
            best: pick(a.best, b.best),
            margin: a.margin.max(b.margin),
        },
    )
}

fn check_nu(nu: f64) -> Result<(), CertifyError> {
    if nu > 0.0 && nu <= 1.0 {
        Ok(())
    } else {
        Err(CertifyError::InvalidExponent {
            value: nu,
            domain: "0 < nu <= 1",
        })
    }
}

/// Samples the defining inequality of `kind` over `region`.
///
/// `claimed_constant` defaults to the objective's own metadata when its
/// exponent matches; without either, the margin is taken against the
/// empirical estimate and is therefore 0.
pub fn certify<O: Objective + ?Sized>(
    kind: CertificateKind,
    objective: &O,
    region: &Region,
    exponent: f64,
    claimed_constant: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport, CertifyError> {
    if samples == 0 {
        return Err(CertifyError::NoSamples);
    }
    if region.dim() != objective.dim() {
        return Err(CertifyError::DimensionMismatch {
            expected: objective.dim(),
            got: region.dim(),
        });
    }
    if let Some(c) = claimed_constant {
        if !(c > 0.0) || !c.is_finite() {
            return Err(CertifyError::InvalidClaim(c));
        }
    }
    let d = objective.dim();
    let f_star = objective.f_star();
    let smooth_meta = objective
        .smoothness()
        .filter(|s| s.nu == exponent)
        .map(|s| s.l_nu);

    let (acc, constant) = match kind {
        CertificateKind::HolderSmooth => {
            check_nu(exponent)?;
            let claim = claimed_constant.or(smooth_meta);
            let seq = Halton::new(2 * d, seed);
            let acc = sweep(samples, true, |i| {
                let p = seq.point(i);
                let x = in_ball(&p[..d], region);
                let y = in_ball(&p[d..], region);
                let lhs = dist(&objective.gradient(&x), &objective.gradient(&y));
                let base = dist(&x, &y).powf(exponent);
                Sample {
                    ratio: (base > 0.0).then(|| lhs / base),
                    violation: claim.map_or(f64::NEG_INFINITY, |l| rel_violation(lhs, l * base)),
                }
            });
            (acc, claim)
        }
        CertificateKind::HolderGrowth => {
            if !(exponent >= 1.0) || !exponent.is_finite() {
                return Err(CertifyError::InvalidExponent {
                    value: exponent,
                    domain: "r >= 1",
                });
            }
            if let Some(s) = objective.smoothness() {
                if exponent < s.nu + 1.0 {
                    return Err(CertifyError::Incompatible { r: exponent, nu: s.nu });
                }
            }
            if objective.dist_to_solution(region.center()).is_none() {
                return Err(CertifyError::NoDistance(objective.name().to_string()));
            }
            let meta = objective
                .growth(region.radius())
                .filter(|g| g.r == exponent)
                .map(|g| g.rho);
            let claim = claimed_constant.or(meta);
            let seq = Halton::new(d, seed);
            let acc = sweep(samples, false, |i| {
                let x = in_ball(&seq.point(i), region);
                let gap = objective.value(&x) - f_star;
                let dr = objective.dist_to_solution(&x).unwrap_or(0.0).powf(exponent);
                Sample {
                    ratio: (dr > 0.0).then(|| gap / dr),
                    violation: claim.map_or(f64::NEG_INFINITY, |rho| rel_violation(rho * dr, gap)),
                }
            });
            (acc, claim)
        }
        CertificateKind::StarConvex => {
            let seq = Halton::new(d, seed);
            let x_star = region.center();
            let acc = sweep(samples, false, |i| {
                let x = in_ball(&seq.point(i), region);
                let gap = objective.value(&x) - f_star;
                let inner = dot(&objective.gradient(&x), &sub(&x, x_star));
                Sample {
                    ratio: (gap > 0.0).then(|| inner / gap),
                    violation: rel_violation(gap, inner),
                }
            });
            (acc, None)
        }
        CertificateKind::Cocoercive => {
            check_nu(exponent)?;
            let nu = exponent;
            let claim = claimed_constant.or(smooth_meta);
            let seq = Halton::new(2 * d, seed);
            let acc = sweep(samples, true, |i| {
                let p = seq.point(i);
                let x = in_ball(&p[..d], region);
                let y = in_ball(&p[d..], region);
                let gx = objective.gradient(&x);
                let fx = objective.value(&x);
                let fy = objective.value(&y);
                let lin = fx + dot(&gx, &sub(&y, &x));
                let dg = dist(&gx, &objective.gradient(&y)).powf((nu + 1.0) / nu) * nu / (nu + 1.0);
                let bregman = fy - lin;
                // Smallest L_ν for which the inequality holds at this pair.
                let ratio = (dg > 0.0 && bregman > 0.0).then(|| (dg / bregman).powf(nu));
                Sample {
                    ratio,
                    violation: claim.map_or(f64::NEG_INFINITY, |l| rel_violation(lin + dg / l.powf(1.0 / nu), fy)),
                }
            });
            (acc, claim)
        }
        CertificateKind::SmoothIneq => {
            check_nu(exponent)?;
            let nu = exponent;
            let claim = claimed_constant.or(smooth_meta);
            let seq = Halton::new(2 * d, seed);
            let acc = sweep(samples, true, |i| {
                let p = seq.point(i);
                let x = in_ball(&p[..d], region);
                let y = in_ball(&p[d..], region);
                let gx = objective.gradient(&x);
                let fx = objective.value(&x);
                let fy = objective.value(&y);
                let lin = fx + dot(&gx, &sub(&y, &x));
                let step = dist(&x, &y).powf(nu + 1.0) / (nu + 1.0);
                let gpow = norm(&gx).powf((nu + 1.0) / nu);
                let gap = fx - f_star;
                let mut ratio: Option<f64> = None;
                if step > 0.0 {
                    ratio = Some((fy - lin) / step);
                }
                if gap > 0.0 {
                    let r2 = (gpow * nu / ((nu + 1.0) * gap)).powf(nu);
                    ratio = Some(ratio.map_or(r2, |r| r.max(r2)));
                }
                let violation = claim.map_or(f64::NEG_INFINITY, |l| {
                    let v1 = rel_violation(fy, lin + l * step);
                    let v2 = rel_violation(gpow, (nu + 1.0) / nu * l.powf(1.0 / nu) * gap);
                    v1.max(v2)
                });
                Sample { ratio, violation }
            });
            (acc, claim)
        }
    };
    let estimate = acc.best.ok_or(CertifyError::Degenerate)?;
    let margin = if kind == CertificateKind::StarConvex || constant.is_some() {
        acc.margin
    } else {
        0.0
    };
    Ok(CertificateReport {
        kind,
        exponent,
        estimate,
        margin,
        constant,
        samples,
        seed,
    })
}

/// `sup ‖∇f‖` over a region: the closed form when the objective has one for
/// a ball around its solution set, otherwise a sampled estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradSup {
    pub value: f64,
    /// True when the value is a sampled lower estimate.
    pub approximate: bool,
}

pub fn grad_sup<O: Objective + ?Sized>(objective: &O, region: &Region, samples: usize, seed: u64) -> GradSup {
    if let Some(v) = objective.grad_sup_on_region(region.radius()) {
        return GradSup {
            value: v,
            approximate: false,
        };
    }
    let seq = Halton::new(objective.dim(), seed);
    let acc = sweep(samples.max(1), true, |i| {
        let x = in_ball(&seq.point(i), region);
        Sample {
            ratio: Some(norm(&objective.gradient(&x))),
            violation: 0.0,
        }
    });
    GradSup {
        value: acc.best.unwrap_or(0.0),
        approximate: true,
    }
}

fn convexity_gap<O: Objective + ?Sized>(objective: &O, x: &[f64], y: &[f64], alpha: f64) -> f64 {
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
    (alpha * objective.value(x) + (1.0 - alpha) * objective.value(y) - objective.value(&mid)).abs() / (alpha * (1.0 - alpha))
}

/// `μ̂(t)`: `λ_max t²/2` for quadratics, otherwise the sampled estimate of
/// [`global_curvature_empirical`].
pub fn global_curvature<O: Objective + ?Sized>(objective: &O, t: f64, samples: usize, seed: u64) -> f64 {
    match objective.quadratic_curvature() {
        Some(lambda) => lambda * t * t / 2.0,
        None => global_curvature_empirical(objective, t, samples, seed),
    }
}

/// Sampled supremum of the normalised convexity gap over chords of length at
/// most `t`. Base points lie in the ball of radius `t` about the minimizer
/// (or the origin); half of the chords have full length `t`.
pub fn global_curvature_empirical<O: Objective + ?Sized>(objective: &O, t: f64, samples: usize, seed: u64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let d = objective.dim();
    let center = objective.minimizer().unwrap_or_else(|| vec![0.0; d]);
    let region = Region {
        center,
        radius: t,
    };
    let seq = Halton::new(2 * d + 1, seed);
    let acc = sweep(samples.max(1), true, |i| {
        let p = seq.point(i);
        let x = in_ball(&p[..d], &region);
        let dir = cube_to_ball(&p[d..2 * d]);
        let nd = norm(&dir);
        if nd == 0.0 {
            return Sample {
                ratio: None,
                violation: 0.0,
            };
        }
        let len = if i % 2 == 0 { t } else { t * p[2 * d] };
        let y = axpy(&x, len / nd, &dir);
        let best = ALPHA_GRID
            .iter()
            .map(|a| convexity_gap(objective, &x, &y, *a))
            .fold(0.0, f64::max);
        Sample {
            ratio: Some(best),
            violation: 0.0,
        }
    });
    acc.best.unwrap_or(0.0)
}

fn bisect_tol(lo: f64, hi: f64) -> bool {
    hi - lo <= 1e-12 * hi
}

/// Inverse of a nondecreasing curvature function: `s` with `μ̂(s) = ε`.
pub fn complexity_gauge(mu_hat: impl Fn(f64) -> f64, epsilon: f64) -> Result<f64, CertifyError> {
    let (lo_limit, hi_limit) = (1e-300, 1e300);
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CertifyError::Bracketing {
            eps: epsilon,
            lo: lo_limit,
            hi: hi_limit,
        });
    }
    let mut hi = 1.0;
    while mu_hat(hi) < epsilon {
        hi *= 2.0;
        if hi > hi_limit {
            return Err(CertifyError::Bracketing {
                eps: epsilon,
                lo: lo_limit,
                hi: hi_limit,
            });
        }
    }
    let mut lo = hi / 2.0;
    while mu_hat(lo) > epsilon {
        lo /= 2.0;
        if lo < lo_limit {
            return Err(CertifyError::Bracketing {
                eps: epsilon,
                lo: lo_limit,
                hi: hi_limit,
            });
        }
    }
    if mu_hat(lo) == epsilon {
        return Ok(lo);
    }
    while !bisect_tol(lo, hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu_hat(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
