//! γ-scaled Polyak gradient descent and its stochastic variant.
//!
//! The update is `x⁺ = x − γ·α·∇f(x)` with `α = (f(x) − f⋆)/‖∇f(x)‖²`.
//! Every iterate is recorded in a [`Trace`]; the record for `x^k` is written
//! before the termination tests at `k`, so a run of `K` steps holds `K + 1`
//! records (the last one is the final iterate, from which no step is taken).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{dist, norm, norm_sq};
use crate::objective::{Objective, StochasticProblem};

pub const DEFAULT_GRAD_TOL: f64 = 1e-14;

/// RNG stream carrying the stepsize perturbations.
const NOISE_STREAM: u64 = 0;
/// RNG stream carrying component sampling in stochastic runs.
const SAMPLER_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("gamma = {0} is outside (0, 2]")]
    InvalidGamma(f64),
    #[error("gamma = {0} is outside the extended range (0, 4)")]
    InvalidExtendedGamma(f64),
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error("invalid tolerance {name} = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("initial point has dimension {got}, objective expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial point is not finite")]
    NonFiniteStart,
    #[error("non-finite value or gradient at iteration {iteration}")]
    NonFinite { iteration: usize, partial: Box<Trace> },
    #[error("negative optimality gap {gap} at iteration {iteration}: f_star is wrong")]
    NegativeGap { iteration: usize, gap: f64 },
    #[error("zero gradient with positive gap {gap}: the objective is inconsistent with convexity")]
    DegenerateStepsize { gap: f64 },
    #[error("zero gradient: the point is already optimal")]
    AtOptimum,
    #[error("sampled component {component} has zero gradient but positive gap {gap} at iteration {iteration}")]
    DegenerateComponent {
        iteration: usize,
        component: usize,
        gap: f64,
    },
    #[error("stochastic problem has no components")]
    NoComponents,
    #[error("trace holds no iterations")]
    EmptyTrace,
    #[error("problem has no closed-form distance to its solution set")]
    NoDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    MaxIters,
    GradTol,
    GapTol,
    StepsizeUndefined,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::GradTol => "grad_tol",
            StopReason::GapTol => "gap_tol",
            StopReason::StepsizeUndefined => "stepsize_undefined",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub gap_tol: f64,
    /// Each stepsize becomes `α(1 + δu)` with `u ~ U[−1, 1]`.
    pub noise_delta: f64,
    pub seed: u64,
    extended_gamma: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            max_iters: 100,
            grad_tol: DEFAULT_GRAD_TOL,
            gap_tol: 0.0,
            noise_delta: 0.0,
            seed: 0,
            extended_gamma: false,
        }
    }
}

impl RunConfig {
    pub fn new(gamma: f64, max_iters: usize) -> Self {
        Self {
            gamma,
            max_iters,
            ..Self::default()
        }
    }

    pub fn with_noise(mut self, delta: f64, seed: u64) -> Self {
        self.noise_delta = delta;
        self.seed = seed;
        self
    }

    pub fn with_tolerances(mut self, grad_tol: f64, gap_tol: f64) -> Self {
        self.grad_tol = grad_tol;
        self.gap_tol = gap_tol;
        self
    }

    /// Admit `γ ∈ (0, 4)`, used when a run on a Hölder-powered objective is
    /// emulated as a run with scaling `2γ/(ν+1)` on its quadratic core.
    pub fn with_extended_gamma(mut self) -> Self {
        self.extended_gamma = true;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.extended_gamma {
            if !(self.gamma > 0.0 && self.gamma < 4.0) {
                return Err(OptimError::InvalidExtendedGamma(self.gamma));
            }
        } else if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(OptimError::InvalidGamma(self.gamma));
        }
        if self.max_iters == 0 {
            return Err(OptimError::ZeroIterations);
        }
        for (name, value) in [
            ("grad_tol", self.grad_tol),
            ("gap_tol", self.gap_tol),
            ("noise_delta", self.noise_delta),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(OptimError::InvalidTolerance { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// `Δ_k = f(x^k) − f⋆` (per-component gap in stochastic runs).
    pub gap: f64,
    pub grad_norm: f64,
    /// Unperturbed Polyak stepsize; `None` when the gradient vanishes.
    pub alpha: Option<f64>,
    pub dist: Option<f64>,
    /// Component sampled at this iterate (stochastic runs only).
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    gamma: f64,
    records: Vec<IterRecord>,
    stop_reason: StopReason,
}

impl Trace {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.iterations() == 0
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace always holds the initial point")
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gap).collect()
    }

    pub fn iterates(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.x.as_slice())
    }
}

/// `α = gap / grad_norm²`.
pub fn polyak_stepsize(gap: f64, grad_norm: f64) -> Result<f64, OptimError> {
    if gap < 0.0 {
        return Err(OptimError::NegativeGap { iteration: 0, gap });
    }
    if grad_norm == 0.0 {
        return Err(if gap > 0.0 {
            OptimError::DegenerateStepsize { gap }
        } else {
            OptimError::AtOptimum
        });
    }
    Ok(gap / (grad_norm * grad_norm))
}

/// One γ-Polyak step from `x`.
pub fn step<O: Objective + ?Sized>(x: &[f64], objective: &O, gamma: f64) -> Result<Vec<f64>, OptimError> {
    let g = objective.gradient(x);
    let gap = objective.value(x) - objective.f_star();
    let g_sq = norm_sq(&g);
    if g_sq == 0.0 {
        return Err(if gap > 0.0 {
            OptimError::DegenerateStepsize { gap }
        } else {
            OptimError::AtOptimum
        });
    }
    if gap < 0.0 {
        return Err(OptimError::NegativeGap { iteration: 0, gap });
    }
    let t = gamma * gap / g_sq;
    Ok(x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect())
}

struct Perturbation {
    delta: f64,
    rng: Option<ChaCha8Rng>,
}

impl Perturbation {
    fn new(config: &RunConfig) -> Self {
        let rng = (config.noise_delta > 0.0).then(|| stream_rng(config.seed, NOISE_STREAM));
        Self {
            delta: config.noise_delta,
            rng,
        }
    }

    fn factor(&mut self) -> f64 {
        match self.rng.as_mut() {
            Some(rng) => 1.0 + self.delta * rng.random_range(-1.0..=1.0),
            None => 1.0,
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_start(x0: &[f64], dim: usize) -> Result<(), OptimError> {
    if x0.len() != dim {
        return Err(OptimError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteStart);
    }
    Ok(())
}

/// Runs γ-PolyakGD for at most `config.max_iters` steps.
pub fn run<O: Objective + ?Sized>(objective: &O, x0: &[f64], config: &RunConfig) -> Result<Trace, OptimError> {
    config.validate()?;
    check_start(x0, objective.dim())?;
    let f_star = objective.f_star();
    let mut noise = Perturbation::new(config);
    let mut records = Vec::new();
    let mut x = x0.to_vec();

    let stop_reason = loop {
        let k = records.len();
        let value = objective.value(&x);
        let g = objective.gradient(&x);
        if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite {
                iteration: k,
                partial: Box::new(Trace {
                    gamma: config.gamma,
                    records,
                    stop_reason: StopReason::MaxIters,
                }),
            });
        }
        let gap = value - f_star;
        if gap < 0.0 {
            return Err(OptimError::NegativeGap { iteration: k, gap });
        }
        let g_sq = norm_sq(&g);
        let alpha = (g_sq > 0.0).then(|| gap / g_sq);
        records.push(IterRecord {
            k,
            x: x.clone(),
            gap,
            grad_norm: g_sq.sqrt(),
            alpha,
            dist: objective.dist_to_solution(&x),
            sample: None,
        });

        if g_sq.sqrt() <= config.grad_tol {
            break if g_sq == 0.0 && gap > config.gap_tol {
                StopReason::StepsizeUndefined
            } else {
                StopReason::GradTol
            };
        }
        if gap <= config.gap_tol {
            break StopReason::GapTol;
        }
        if k == config.max_iters {
            break StopReason::MaxIters;
        }
        let t = config.gamma * alpha.unwrap_or(0.0) * noise.factor();
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= t * gi);
    };

    Ok(Trace {
        gamma: config.gamma,
        records,
        stop_reason,
    })
}

/// Stochastic γ-PolyakGD: each step samples a component uniformly and uses its
/// own Polyak stepsize `(f(x, i) − f⋆_i)/‖∇f(x, i)‖²`.
///
/// A sampled component with vanishing gradient contributes no step; the run
/// stops on `grad_tol` only once the full gradient is below tolerance as
/// well. With one component this coincides with [`run`].
pub fn run_stochastic<P: StochasticProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &RunConfig,
) -> Result<Trace, OptimError> {
    config.validate()?;
    check_start(x0, problem.dim())?;
    let m = problem.components();
    if m == 0 {
        return Err(OptimError::NoComponents);
    }
    let full_f_star = problem.full_f_star();
    let mut noise = Perturbation::new(config);
    let mut sampler = stream_rng(config.seed, SAMPLER_STREAM);
    let mut records = Vec::new();
    let mut x = x0.to_vec();

    let stop_reason = loop {
        let k = records.len();
        let i = if m == 1 { 0 } else { sampler.random_range(0..m) };
        let value = problem.component_value(&x, i);
        let g = problem.component_gradient(&x, i);
        if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite {
                iteration: k,
                partial: Box::new(Trace {
                    gamma: config.gamma,
                    records,
                    stop_reason: StopReason::MaxIters,
                }),
            });
        }
        let gap = value - problem.component_f_star(i);
        if gap < 0.0 {
            return Err(OptimError::NegativeGap { iteration: k, gap });
        }
        let g_sq = norm_sq(&g);
        let alpha = (g_sq > 0.0).then(|| gap / g_sq);
        records.push(IterRecord {
            k,
            x: x.clone(),
            gap,
            grad_norm: g_sq.sqrt(),
            alpha,
            dist: problem.dist_to_solution(&x),
            sample: Some(i),
        });

        let mut skip = false;
        if g_sq.sqrt() <= config.grad_tol {
            if g_sq == 0.0 && gap > config.gap_tol {
                return Err(OptimError::DegenerateComponent {
                    iteration: k,
                    component: i,
                    gap,
                });
            }
            let full_g = if m == 1 { g.clone() } else { problem.full_gradient(&x) };
            if norm_sq(&full_g).sqrt() <= config.grad_tol {
                break StopReason::GradTol;
            }
            skip = true;
        }
        let full_gap = if m == 1 {
            gap
        } else {
            problem.full_value(&x) - full_f_star
        };
        if full_gap <= config.gap_tol {
            break StopReason::GapTol;
        }
        if k == config.max_iters {
            break StopReason::MaxIters;
        }
        if !skip {
            let t = config.gamma * alpha.unwrap_or(0.0) * noise.factor();
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= t * gi);
        }
    };

    Ok(Trace {
        gamma: config.gamma,
        records,
        stop_reason,
    })
}

/// Smallest gap over `k = 1..=K`, ties broken towards the smaller index.
pub fn best_iterate(trace: &Trace) -> Result<(usize, f64), OptimError> {
    best_by(trace, |r| r.gap)
}

/// Smallest gradient norm over `k = 1..=K`.
pub fn best_grad_norm(trace: &Trace) -> Result<(usize, f64), OptimError> {
    best_by(trace, |r| r.grad_norm)
}

fn best_by(trace: &Trace, key: impl Fn(&IterRecord) -> f64) -> Result<(usize, f64), OptimError> {
    trace.records[1..]
        .iter()
        .map(|r| (r.k, key(r)))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        })
        .ok_or(OptimError::EmptyTrace)
}

/// `m_k = ‖x^k − x⋆‖² − ‖x^{k+1} − x⋆‖² − γ(2−γ)Δ_k²/‖∇f(x^k)‖²` for every step.
pub fn fejer_margin(trace: &Trace, x_star: &[f64], gamma: f64) -> Vec<f64> {
    trace
        .records
        .windows(2)
        .map(|w| {
            let before = dist(&w[0].x, x_star);
            let after = dist(&w[1].x, x_star);
            let decrease = if w[0].grad_norm > 0.0 {
                gamma * (2.0 - gamma) * w[0].gap * w[0].gap / (w[0].grad_norm * w[0].grad_norm)
            } else {
                0.0
            };
            before * before - after * after - decrease
        })
        .collect()
}

/// Per-iteration statistics of `‖x^k − x⋆‖` over independent stochastic paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub mean_sq_dist: Vec<f64>,
    pub min_dist: Vec<f64>,
    pub max_dist: Vec<f64>,
    /// Steps, over all paths, where the distance grew by more than
    /// `slack · (‖x^k − x⋆‖ + ‖x⋆‖)`. The `‖x⋆‖` term absorbs rounding in
    /// the iterate itself once the distance is tiny.
    pub increases: usize,
    pub paths: usize,
}

/// Runs `paths` copies of [`run_stochastic`], path `p` with seed
/// `config.seed + p`. A path that stops early keeps its final distance for
/// the remaining iterations.
pub fn stochastic_ensemble<P: StochasticProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &RunConfig,
    paths: usize,
    slack: f64,
) -> Result<Ensemble, OptimError> {
    use rayon::prelude::*;

    let horizon = config.max_iters;
    let scale = problem.common_minimizer().map_or(0.0, |m| norm(&m));
    let per_path: Vec<(Vec<f64>, usize)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(p as u64);
            let trace = run_stochastic(problem, x0, &cfg)?;
            let mut d: Vec<f64> = trace
                .records
                .iter()
                .map(|r| r.dist.ok_or(OptimError::NoDistance))
                .collect::<Result<_, _>>()?;
            let increases = d.windows(2).filter(|w| w[1] > w[0] + slack * (w[0] + scale)).count();
            let last = *d.last().expect("a trace holds at least one record");
            d.resize(horizon + 1, last);
            Ok((d, increases))
        })
        .collect::<Result<_, OptimError>>()?;
    let mut out = Ensemble {
        mean_sq_dist: vec![0.0; horizon + 1],
        min_dist: vec![f64::INFINITY; horizon + 1],
        max_dist: vec![0.0; horizon + 1],
        increases: 0,
        paths,
    };
    for (d, inc) in &per_path {
        out.increases += inc;
        for (k, v) in d.iter().enumerate() {
            out.mean_sq_dist[k] += v * v;
            out.min_dist[k] = out.min_dist[k].min(*v);
            out.max_dist[k] = out.max_dist[k].max(*v);
        }
    }
    out.mean_sq_dist.iter_mut().for_each(|v| *v /= paths.max(1) as f64);
    Ok(out)
}
