//! Test objectives: the worst-case quadratic family, its scaled and
//! Hölder-powered variants, the Huber loss, `‖Ax‖^{1+ν}`, `|x|`, interpolated
//! least squares and a nonconvex counterexample, together with the
//! closed-form worst-case trajectory.
//!
//! All built-ins have `f⋆ = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{dist, norm, norm_sq, pow_int, smallest_singular_value, spectral_norm_symmetric, Matrix};
use crate::objective::{HolderGrowth, HolderSmoothness, Objective, StochasticProblem};

/// Relative accuracy of the power iterations behind matrix metadata.
const POWER_ITERATION_TOL: f64 = 1e-12;

/// Relative tolerance on the worst-case ray relation for `exact_trajectory`.
const RAY_RELATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestbedError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("kappa = {kappa} is not admissible for gamma = {gamma}: need kappa > max(4/gamma - 1, gamma/(4 - gamma)) = {bound}")]
    InadmissibleKappa { gamma: f64, kappa: f64, bound: f64 },
    #[error("matrix must be square, symmetric and finite")]
    InvalidMatrix,
    #[error("initial point violates the worst-case ray relation (relative error {rel_err:e})")]
    NotOnWorstCaseRay { rel_err: f64 },
}

fn param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), TestbedError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(TestbedError::InvalidParameter { name, value, reason })
    }
}

fn check_nu(nu: f64) -> Result<(), TestbedError> {
    param("nu", nu, nu > 0.0 && nu <= 1.0, "must lie in (0, 1]")
}

/// Parameters of one of the built-in objectives.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// `q(x) = κ/2 x₁² + 1/2 x₂²`.
    QuadQ { kappa: f64 },
    /// `q̃ = (L/κ) q`, an `L`-smooth convex quadratic.
    ScaledQ { kappa: f64, l: f64 },
    /// `q_ν = q̃^{(ν+1)/2}`.
    HolderPowerQ { kappa: f64, l: f64, nu: f64 },
    /// Huber loss with threshold `1/(2K+1)`.
    Huber { horizon: u64 },
    /// `p_A(x) = ‖Ax‖^{1+ν}` for symmetric `A`.
    MatrixPower { a: Matrix, nu: f64 },
    /// `|x|` on the real line.
    Abs1d,
    /// `(1/m) Σ ½(a_iᵀx − b_i)²` with `b = A x⋆`.
    InterpLsq { m: usize, n: usize, seed: u64 },
    /// `‖x‖²/(1 + ‖x‖²)`: star-shaped around 0 but not convex; used to
    /// exhibit Fejér violations.
    NonconvexRational { dim: usize },
}

impl ObjectiveSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ObjectiveSpec::QuadQ { .. } => "quad_q",
            ObjectiveSpec::ScaledQ { .. } => "scaled_q",
            ObjectiveSpec::HolderPowerQ { .. } => "holder_power_q",
            ObjectiveSpec::Huber { .. } => "huber",
            ObjectiveSpec::MatrixPower { .. } => "matrix_power",
            ObjectiveSpec::Abs1d => "abs1d",
            ObjectiveSpec::InterpLsq { .. } => "interp_lsq",
            ObjectiveSpec::NonconvexRational { .. } => "nonconvex_rational",
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Quad { kappa: f64, scale: f64 },
    HolderPower { kappa: f64, l: f64, nu: f64 },
    Huber { threshold: f64 },
    MatrixPower(MatrixPowerData),
    Abs,
    Lsq(InterpolatedLeastSquares),
    Nonconvex { dim: usize },
}

#[derive(Debug, Clone)]
struct MatrixPowerData {
    a: Matrix,
    nu: f64,
    spectral_norm: f64,
    sigma_min: f64,
}

/// A built-in objective produced by [`make_objective`].
#[derive(Debug, Clone)]
pub struct TestObjective {
    name: &'static str,
    kind: Kind,
}

pub fn make_objective(spec: &ObjectiveSpec) -> Result<TestObjective, TestbedError> {
    let kind = match spec {
        ObjectiveSpec::QuadQ { kappa } => {
            param("kappa", *kappa, *kappa >= 1.0, "must be at least 1")?;
            Kind::Quad {
                kappa: *kappa,
                scale: 1.0,
            }
        }
        ObjectiveSpec::ScaledQ { kappa, l } => {
            param("kappa", *kappa, *kappa >= 1.0, "must be at least 1")?;
            param("L", *l, *l > 0.0, "must be positive")?;
            Kind::Quad {
                kappa: *kappa,
                scale: l / kappa,
            }
        }
        ObjectiveSpec::HolderPowerQ { kappa, l, nu } => {
            param("kappa", *kappa, *kappa >= 1.0, "must be at least 1")?;
            param("L", *l, *l > 0.0, "must be positive")?;
            check_nu(*nu)?;
            Kind::HolderPower {
                kappa: *kappa,
                l: *l,
                nu: *nu,
            }
        }
        ObjectiveSpec::Huber { horizon } => {
            param("K", *horizon as f64, *horizon >= 1, "must be at least 1")?;
            Kind::Huber {
                threshold: 1.0 / (2.0 * *horizon as f64 + 1.0),
            }
        }
        ObjectiveSpec::MatrixPower { a, nu } => {
            check_nu(*nu)?;
            if !a.is_finite() || !a.is_symmetric(1e-14) {
                return Err(TestbedError::InvalidMatrix);
            }
            Kind::MatrixPower(MatrixPowerData {
                a: a.clone(),
                nu: *nu,
                spectral_norm: spectral_norm_symmetric(a, POWER_ITERATION_TOL),
                sigma_min: if a.gram().is_positive_definite() {
                    smallest_singular_value(a, POWER_ITERATION_TOL)
                } else {
                    0.0
                },
            })
        }
        ObjectiveSpec::Abs1d => Kind::Abs,
        ObjectiveSpec::InterpLsq { m, n, seed } => Kind::Lsq(InterpolatedLeastSquares::generate(*m, *n, *seed)?),
        ObjectiveSpec::NonconvexRational { dim } => {
            param("dim", *dim as f64, *dim >= 1, "must be at least 1")?;
            Kind::Nonconvex { dim: *dim }
        }
    };
    Ok(TestObjective {
        name: spec.kind_name(),
        kind,
    })
}

fn quad_value(kappa: f64, x: &[f64]) -> f64 {
    0.5 * (kappa * x[0] * x[0] + x[1] * x[1])
}

impl TestObjective {
    /// The interpolated least-squares problem behind an `interp_lsq` objective.
    pub fn as_least_squares(&self) -> Option<&InterpolatedLeastSquares> {
        match &self.kind {
            Kind::Lsq(p) => Some(p),
            _ => None,
        }
    }
}

impl Objective for TestObjective {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        match &self.kind {
            Kind::Quad { .. } | Kind::HolderPower { .. } | Kind::Huber { .. } => 2,
            Kind::MatrixPower(d) => d.a.cols(),
            Kind::Abs => 1,
            Kind::Lsq(p) => p.dim(),
            Kind::Nonconvex { dim } => *dim,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Quad { kappa, scale } => scale * quad_value(*kappa, x),
            Kind::HolderPower { kappa, l, nu } => {
                let core = l / kappa * quad_value(*kappa, x);
                core.powf((nu + 1.0) / 2.0)
            }
            Kind::Huber { threshold: t } => {
                let r = norm(x);
                if r > *t {
                    t * r - 0.5 * t * t
                } else {
                    0.5 * r * r
                }
            }
            Kind::MatrixPower(d) => norm(&d.a.matvec(x)).powf(1.0 + d.nu),
            Kind::Abs => x[0].abs(),
            Kind::Lsq(p) => p.full_value(x),
            Kind::Nonconvex { .. } => {
                let s = norm_sq(x);
                s / (1.0 + s)
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Quad { kappa, scale } => vec![scale * kappa * x[0], scale * x[1]],
            Kind::HolderPower { kappa, l, nu } => {
                let s = l / kappa;
                let core = s * quad_value(*kappa, x);
                if core == 0.0 {
                    return vec![0.0, 0.0];
                }
                let c = (nu + 1.0) / 2.0 * core.powf((nu - 1.0) / 2.0);
                vec![c * s * kappa * x[0], c * s * x[1]]
            }
            Kind::Huber { threshold: t } => {
                let r = norm(x);
                if r > *t {
                    x.iter().map(|v| t * v / r).collect()
                } else {
                    x.to_vec()
                }
            }
            Kind::MatrixPower(d) => {
                let ax = d.a.matvec(x);
                let r = norm(&ax);
                if r == 0.0 {
                    return vec![0.0; x.len()];
                }
                let c = (1.0 + d.nu) * r.powf(d.nu - 1.0);
                d.a.matvec(&ax).into_iter().map(|v| c * v).collect()
            }
            // Minimal-norm subgradient at the kink.
            Kind::Abs => vec![if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            }],
            Kind::Lsq(p) => p.full_gradient(x),
            Kind::Nonconvex { .. } => {
                let s = norm_sq(x);
                let c = 2.0 / ((1.0 + s) * (1.0 + s));
                x.iter().map(|v| c * v).collect()
            }
        }
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Lsq(p) => Some(p.x_star.clone()),
            Kind::MatrixPower(d) if d.sigma_min == 0.0 => None,
            _ => Some(vec![0.0; self.dim()]),
        }
    }

    fn dist_to_solution(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::Lsq(p) => Some(dist(x, &p.x_star)),
            // The solution set is the null space; only the nonsingular case is closed form.
            Kind::MatrixPower(d) if d.sigma_min == 0.0 => None,
            _ => Some(norm(x)),
        }
    }

    fn grad_sup_on_region(&self, radius: f64) -> Option<f64> {
        match &self.kind {
            Kind::Quad { kappa, scale } => Some(scale * kappa * radius),
            Kind::HolderPower { l, nu, .. } => {
                // ‖∇q_ν(x)‖ ≤ 2^{-(ν+1)/2}(ν+1) L^{(ν+1)/2} ‖x‖^ν, attained on the top eigenvector.
                Some(2f64.powf(-(nu + 1.0) / 2.0) * (nu + 1.0) * l.powf((nu + 1.0) / 2.0) * radius.powf(*nu))
            }
            Kind::Huber { threshold } => Some(radius.min(*threshold)),
            Kind::MatrixPower(d) if d.sigma_min > 0.0 => {
                Some((1.0 + d.nu) * d.spectral_norm.powf(1.0 + d.nu) * radius.powf(d.nu))
            }
            Kind::Abs => Some(1.0),
            Kind::Lsq(p) => Some(p.lambda_max * radius),
            _ => None,
        }
    }

    fn smoothness(&self) -> Option<HolderSmoothness> {
        match &self.kind {
            Kind::Quad { kappa, scale } => Some(HolderSmoothness {
                nu: 1.0,
                l_nu: scale * kappa,
            }),
            Kind::HolderPower { l, nu, .. } => Some(HolderSmoothness {
                nu: *nu,
                l_nu: holder_power_l_nu(*nu, *l),
            }),
            Kind::Huber { .. } => Some(HolderSmoothness { nu: 1.0, l_nu: 1.0 }),
            Kind::MatrixPower(d) => Some(HolderSmoothness {
                nu: d.nu,
                l_nu: matrix_power_l_nu(d.nu, d.spectral_norm),
            }),
            Kind::Lsq(p) => Some(HolderSmoothness {
                nu: 1.0,
                l_nu: p.lambda_max,
            }),
            Kind::Abs | Kind::Nonconvex { .. } => None,
        }
    }

    fn growth(&self, radius: f64) -> Option<HolderGrowth> {
        match &self.kind {
            Kind::Quad { scale, .. } => Some(HolderGrowth { r: 2.0, rho: scale / 2.0 }),
            Kind::HolderPower { kappa, l, nu } => Some(HolderGrowth {
                r: nu + 1.0,
                rho: (l / (2.0 * kappa)).powf((nu + 1.0) / 2.0),
            }),
            Kind::Huber { threshold: t } => {
                // H(x)/‖x‖² is ½ inside the threshold and decreasing outside it.
                let rho = if radius <= *t {
                    0.5
                } else {
                    t / radius - t * t / (2.0 * radius * radius)
                };
                Some(HolderGrowth { r: 2.0, rho })
            }
            Kind::MatrixPower(d) if d.sigma_min > 0.0 => Some(HolderGrowth {
                r: 1.0 + d.nu,
                rho: d.sigma_min.powf(1.0 + d.nu),
            }),
            Kind::Abs => Some(HolderGrowth { r: 1.0, rho: 1.0 }),
            Kind::Lsq(p) => Some(HolderGrowth {
                r: 2.0,
                rho: p.lambda_min / 2.0,
            }),
            _ => None,
        }
    }

    fn quadratic_curvature(&self) -> Option<f64> {
        match &self.kind {
            Kind::Quad { kappa, scale } => Some(scale * kappa),
            Kind::HolderPower { nu, l, .. } if *nu == 1.0 => Some(*l),
            Kind::Lsq(p) => Some(p.lambda_max),
            _ => None,
        }
    }
}

/// `L_ν = 2^{(1−3ν)/2}(ν+1)L^{(ν+1)/2}` for `q_ν = q̃^{(ν+1)/2}`.
pub fn holder_power_l_nu(nu: f64, l: f64) -> f64 {
    2f64.powf((1.0 - 3.0 * nu) / 2.0) * (nu + 1.0) * l.powf((nu + 1.0) / 2.0)
}

/// `L_ν = 2^{1−ν}(ν+1)‖A‖^{ν+1}` for `‖Ax‖^{1+ν}`.
pub fn matrix_power_l_nu(nu: f64, spectral_norm: f64) -> f64 {
    2f64.powf(1.0 - nu) * (nu + 1.0) * spectral_norm.powf(nu + 1.0)
}

/// Consistent least squares: `f_i(x) = ½(a_iᵀx − b_i)²`, `b = A x⋆`, so every
/// component attains `f⋆_i = 0` at the common minimizer `x⋆`.
#[derive(Debug, Clone)]
pub struct InterpolatedLeastSquares {
    a: Matrix,
    b: Vec<f64>,
    x_star: Vec<f64>,
    lambda_max: f64,
    lambda_min: f64,
}

impl InterpolatedLeastSquares {
    /// Gaussian `A` (redrawn until `AᵀA` is positive definite) and Gaussian
    /// `x⋆` from the seeded generator.
    pub fn generate(m: usize, n: usize, seed: u64) -> Result<Self, TestbedError> {
        param("n", n as f64, n >= 1, "must be at least 1")?;
        param("m", m as f64, m > n, "must exceed n")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = loop {
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let a = Matrix::from_rows(&rows).expect("nonempty rectangular rows");
            if a.gram().is_positive_definite() {
                break a;
            }
        };
        let x_star: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b = a.matvec(&x_star);
        let scaled = a.scaled(1.0 / (m as f64).sqrt());
        let lambda_max = spectral_norm_symmetric(&scaled.gram(), POWER_ITERATION_TOL);
        let sigma_min = smallest_singular_value(&scaled, POWER_ITERATION_TOL);
        Ok(Self {
            a,
            b,
            x_star,
            lambda_max,
            lambda_min: sigma_min * sigma_min,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    /// Extreme eigenvalues of `AᵀA/m`.
    pub fn eigen_range(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    fn residual(&self, x: &[f64], i: usize) -> f64 {
        crate::linalg::dot(self.a.row(i), x) - self.b[i]
    }
}

impl StochasticProblem for InterpolatedLeastSquares {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn components(&self) -> usize {
        self.a.rows()
    }

    fn component_value(&self, x: &[f64], i: usize) -> f64 {
        let r = self.residual(x, i);
        0.5 * r * r
    }

    fn component_gradient(&self, x: &[f64], i: usize) -> Vec<f64> {
        let r = self.residual(x, i);
        self.a.row(i).iter().map(|v| r * v).collect()
    }

    fn component_f_star(&self, _i: usize) -> f64 {
        0.0
    }

    fn common_minimizer(&self) -> Option<Vec<f64>> {
        Some(self.x_star.clone())
    }

    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = (0..self.components()).map(|i| self.residual(x, i)).collect();
        let m = self.components() as f64;
        self.a.rmatvec(&r).into_iter().map(|v| v / m).collect()
    }
}

/// Parameters of the worst-case quadratic construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseSpec {
    pub kappa: f64,
    pub l: f64,
    pub nu: f64,
    pub gamma: f64,
}

impl WorstCaseSpec {
    pub fn new(gamma: f64, kappa: f64, l: f64, nu: f64) -> Result<Self, TestbedError> {
        check_admissible(gamma, kappa)?;
        param("L", l, l > 0.0, "must be positive")?;
        check_nu(nu)?;
        Ok(Self { kappa, l, nu, gamma })
    }

    pub fn initial_point(&self, unit_sphere: bool) -> [f64; 2] {
        worstcase_initial_point(self.gamma, self.kappa, unit_sphere).expect("validated on construction")
    }

    pub fn quad(&self) -> TestObjective {
        make_objective(&ObjectiveSpec::QuadQ { kappa: self.kappa }).expect("validated")
    }

    pub fn scaled(&self) -> TestObjective {
        make_objective(&ObjectiveSpec::ScaledQ {
            kappa: self.kappa,
            l: self.l,
        })
        .expect("validated")
    }

    pub fn holder_power(&self) -> TestObjective {
        make_objective(&ObjectiveSpec::HolderPowerQ {
            kappa: self.kappa,
            l: self.l,
            nu: self.nu,
        })
        .expect("validated")
    }
}

/// `max{4/γ − 1, γ/(4 − γ)}`.
pub fn admissible_kappa_bound(gamma: f64) -> f64 {
    (4.0 / gamma - 1.0).max(gamma / (4.0 - gamma))
}

pub fn check_admissible(gamma: f64, kappa: f64) -> Result<(), TestbedError> {
    param("gamma", gamma, gamma > 0.0 && gamma < 4.0, "must lie in (0, 4)")?;
    let bound = admissible_kappa_bound(gamma);
    if !(kappa > bound) || !kappa.is_finite() {
        return Err(TestbedError::InadmissibleKappa { gamma, kappa, bound });
    }
    Ok(())
}

/// Ratio `(x₂/x₁)²` preserved along the worst-case trajectory.
pub fn worstcase_ray_ratio(gamma: f64, kappa: f64) -> f64 {
    (4.0 * kappa * kappa - gamma * kappa * (kappa + 1.0)) / (gamma * (kappa + 1.0) - 4.0)
}

/// Initial point with positive components on the worst-case ray. Without
/// normalisation `x₁ = 1`; with it, `‖x⁰‖ = 1`.
pub fn worstcase_initial_point(gamma: f64, kappa: f64, unit_sphere: bool) -> Result<[f64; 2], TestbedError> {
    check_admissible(gamma, kappa)?;
    if unit_sphere {
        let denom = (4.0 - gamma) * (kappa * kappa - 1.0);
        let x1_sq = (gamma * (kappa + 1.0) - 4.0) / denom;
        let x2_sq = kappa * (4.0 * kappa - gamma * kappa - gamma) / denom;
        Ok([x1_sq.sqrt(), x2_sq.sqrt()])
    } else {
        Ok([1.0, worstcase_ray_ratio(gamma, kappa).sqrt()])
    }
}

/// `κ = 4K/γ + γ/(4 − γ)`, the condition number that turns the linear rate
/// into an `O(1/K)` rate at horizon `K`.
pub fn kappa_for_horizon(gamma: f64, horizon: u64) -> Result<f64, TestbedError> {
    param("gamma", gamma, gamma > 0.0 && gamma < 4.0, "must lie in (0, 4)")?;
    param("K", horizon as f64, horizon >= 1, "must be at least 1")?;
    Ok(4.0 * horizon as f64 / gamma + gamma / (4.0 - gamma))
}

/// Closed-form `x^k` and `q(x^k)` of γ-PolyakGD on `q` from a point on the
/// worst-case ray: both coordinates shrink by `(κ−1)/(κ+1)` per step and `x₁`
/// flips sign every step.
pub fn exact_trajectory(gamma: f64, kappa: f64, x0: [f64; 2], k: u64) -> Result<([f64; 2], f64), TestbedError> {
    check_admissible(gamma, kappa)?;
    let lhs = x0[1] * x0[1];
    let rhs = worstcase_ray_ratio(gamma, kappa) * x0[0] * x0[0];
    let scale = lhs.abs().max(rhs.abs());
    let rel_err = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    if scale == 0.0 || rel_err > RAY_RELATION_TOL {
        return Err(TestbedError::NotOnWorstCaseRay {
            rel_err: if scale == 0.0 { f64::INFINITY } else { rel_err },
        });
    }
    let ratio = (kappa - 1.0) / (kappa + 1.0);
    let shrink = pow_int(ratio, k);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let xk = [sign * shrink * x0[0], shrink * x0[1]];
    let gap = pow_int(ratio, 2 * k) * quad_value(kappa, &x0);
    Ok((xk, gap))
}

/// Normalised best-iterate gap `min_{1≤k≤K} q_ν(x^k)/(L_ν‖x⁰‖^{ν+1})` of
/// γ-PolyakGD on the Hölder-powered worst case tuned to horizon `K`.
///
/// On `q_ν` the method moves exactly like the `2γ/(ν+1)`-scaled method on
/// its quadratic core, so the closed-form trajectory applies with
/// `κ = kappa_for_horizon(2γ/(ν+1), K)` and a unit-sphere start.
pub fn holder_worstcase_gap(gamma: f64, nu: f64, l: f64, horizon: u64) -> Result<f64, TestbedError> {
    check_nu(nu)?;
    param("L", l, l > 0.0, "must be positive")?;
    let core_gamma = 2.0 * gamma / (nu + 1.0);
    let kappa = kappa_for_horizon(core_gamma, horizon)?;
    let x0 = worstcase_initial_point(core_gamma, kappa, true)?;
    let (_, gap) = exact_trajectory(core_gamma, kappa, x0, horizon)?;
    let core = l / kappa * gap;
    Ok(core.powf((nu + 1.0) / 2.0) / holder_power_l_nu(nu, l))
}
