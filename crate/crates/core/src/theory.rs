//! Closed-form lower and upper bounds for γ-PolyakGD, numeric checks of the
//! auxiliary inequalities behind them, and a log-log rate fit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::pow_int;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{kind}: parameter {name} = {value} violates {condition}")]
    Domain {
        kind: &'static str,
        name: &'static str,
        value: f64,
        condition: &'static str,
    },
    #[error("{kind}: missing parameter {name}")]
    Missing { kind: &'static str, name: &'static str },
    #[error("growth exponent r = {r} is incompatible with smoothness exponent nu = {nu}: need r >= nu + 1")]
    Incompatible { r: f64, nu: f64 },
    #[error("{kind} is not a {expected} bound")]
    WrongDirection { kind: &'static str, expected: &'static str },
    #[error("contraction factor c = {c} is not below 1; the supplied constants are inconsistent")]
    NoContraction { c: f64 },
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs positive K and value, got ({k}, {value})")]
    NonPositivePoint { k: f64, value: f64 },
    #[error("rate fit needs at least two distinct K values")]
    DegenerateAbscissae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    LbStrong,
    LbSmooth,
    LbHolder,
    LbGradnorm,
    UbGrowthLinear,
    UbGrowthSublinear,
    Ub2Polyak,
    UbGradnorm,
    UbGcb,
}

impl BoundKind {
    pub const ALL: [BoundKind; 9] = [
        BoundKind::LbStrong,
        BoundKind::LbSmooth,
        BoundKind::LbHolder,
        BoundKind::LbGradnorm,
        BoundKind::UbGrowthLinear,
        BoundKind::UbGrowthSublinear,
        BoundKind::Ub2Polyak,
        BoundKind::UbGradnorm,
        BoundKind::UbGcb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::LbStrong => "lb_strong",
            BoundKind::LbSmooth => "lb_smooth",
            BoundKind::LbHolder => "lb_holder",
            BoundKind::LbGradnorm => "lb_gradnorm",
            BoundKind::UbGrowthLinear => "ub_growth_linear",
            BoundKind::UbGrowthSublinear => "ub_growth_sublinear",
            BoundKind::Ub2Polyak => "ub_2polyak",
            BoundKind::UbGradnorm => "ub_gradnorm",
            BoundKind::UbGcb => "ub_gcb",
        }
    }

    pub fn is_lower(self) -> bool {
        matches!(
            self,
            BoundKind::LbStrong | BoundKind::LbSmooth | BoundKind::LbHolder | BoundKind::LbGradnorm
        )
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown bound kind '{s}'"))
    }
}

/// What a bound value is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `(f(x^k) − f⋆) / (L‖x⁰ − x⋆‖²)`
    GapOverLD2,
    /// `(f(x^k) − f⋆) / (L_ν‖x⁰ − x⋆‖^{ν+1})`
    GapOverLnuDnu1,
    /// `‖∇f(x^k)‖ / (L_ν‖x⁰ − x⋆‖^{(ν+1)/2})`
    GradnormOverLnuDhalf,
    AbsoluteGap,
    AbsoluteGradnorm,
    /// `(f(x^k) − f⋆) / (f(x⁰) − f⋆)`
    RelativeGap,
}

/// Which argument of `μ̂` the global-curvature bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GcbVariant {
    /// `μ̂(3 D₀ / √K)`
    #[default]
    Linear,
    /// `μ̂(3 D₀² / √K)`
    Squared,
}

/// Shared handle to a curvature function `t ↦ μ̂(t)`.
#[derive(Clone)]
pub struct CurvatureFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CurvatureFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for CurvatureFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CurvatureFn(..)")
    }
}

/// Parameters for a bound evaluation; each kind reads only what it needs.
#[derive(Debug, Clone, Default)]
pub struct BoundParams {
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    /// `L` or `L_ν`.
    pub l: Option<f64>,
    pub rho: Option<f64>,
    /// Horizon `K` (or `k` for the strongly convex bound).
    pub horizon: Option<u64>,
    /// `dist(x⁰, X⋆)`.
    pub dist0: Option<f64>,
    /// `sup ‖∇f‖` over the Fejér region.
    pub grad_sup: Option<f64>,
    pub curvature: Option<CurvatureFn>,
    pub gcb_variant: GcbVariant,
}

#[derive(Debug, Clone)]
pub struct BoundQuery {
    pub kind: BoundKind,
    pub params: BoundParams,
}

impl BoundQuery {
    pub fn new(kind: BoundKind, params: BoundParams) -> Self {
        Self { kind, params }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub normalization: Normalization,
    /// Set when the horizon was rounded down to the nearest even value.
    pub adjusted_horizon: Option<u64>,
}

impl BoundValue {
    fn plain(value: f64, normalization: Normalization) -> Self {
        Self {
            value,
            normalization,
            adjusted_horizon: None,
        }
    }
}

struct Reader<'a> {
    kind: &'static str,
    p: &'a BoundParams,
}

impl Reader<'_> {
    fn get(&self, name: &'static str, v: Option<f64>) -> Result<f64, TheoryError> {
        let v = v.ok_or(TheoryError::Missing { kind: self.kind, name })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain(name, v, "finite"))
        }
    }

    fn domain(&self, name: &'static str, value: f64, condition: &'static str) -> TheoryError {
        TheoryError::Domain {
            kind: self.kind,
            name,
            value,
            condition,
        }
    }

    fn require(&self, name: &'static str, value: f64, ok: bool, condition: &'static str) -> Result<f64, TheoryError> {
        if ok {
            Ok(value)
        } else {
            Err(self.domain(name, value, condition))
        }
    }

    fn gamma_in(&self, hi: f64, hi_inclusive: bool, condition: &'static str) -> Result<f64, TheoryError> {
        let g = self.get("gamma", self.p.gamma)?;
        let ok = g > 0.0 && if hi_inclusive { g <= hi } else { g < hi };
        self.require("gamma", g, ok, condition)
    }

    fn nu(&self) -> Result<f64, TheoryError> {
        let nu = self.get("nu", self.p.nu)?;
        self.require("nu", nu, nu > 0.0 && nu <= 1.0, "0 < nu <= 1")
    }

    fn positive(&self, name: &'static str, v: Option<f64>) -> Result<f64, TheoryError> {
        let x = self.get(name, v)?;
        self.require(name, x, x > 0.0, "value > 0")
    }

    fn nonnegative(&self, name: &'static str, v: Option<f64>) -> Result<f64, TheoryError> {
        let x = self.get(name, v)?;
        self.require(name, x, x >= 0.0, "value >= 0")
    }

    fn horizon(&self, min: u64, condition: &'static str) -> Result<u64, TheoryError> {
        let k = self.p.horizon.ok_or(TheoryError::Missing {
            kind: self.kind,
            name: "K",
        })?;
        if k >= min {
            Ok(k)
        } else {
            Err(self.domain("K", k as f64, condition))
        }
    }
}

/// Evaluates one of the lower bounds.
pub fn lower_bound(query: &BoundQuery) -> Result<BoundValue, TheoryError> {
    if !query.kind.is_lower() {
        return Err(TheoryError::WrongDirection {
            kind: query.kind.as_str(),
            expected: "lower",
        });
    }
    let rd = Reader {
        kind: query.kind.as_str(),
        p: &query.params,
    };
    let e = std::f64::consts::E;
    match query.kind {
        BoundKind::LbStrong => {
            let kappa = rd.get("kappa", rd.p.kappa)?;
            rd.require("kappa", kappa, kappa > 1.0, "kappa > 1")?;
            let k = rd.horizon(0, "k >= 0")?;
            let ratio = (kappa - 1.0) / (kappa + 1.0);
            Ok(BoundValue::plain(pow_int(ratio, 2 * k), Normalization::RelativeGap))
        }
        BoundKind::LbSmooth => {
            let g = rd.gamma_in(4.0, false, "0 < gamma < 4")?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let v = g / (2.0 * e.powf(2.0 * g) * ((4.0 - g) * k + g));
            Ok(BoundValue::plain(v, Normalization::GapOverLD2))
        }
        BoundKind::LbHolder => {
            let g = rd.gamma_in(2.0, false, "0 < gamma < 2")?;
            let nu = rd.nu()?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let p = (nu + 1.0) / 2.0;
            let v = 2f64.powf(nu - 1.0) * g.powf(p)
                / (e.powf(2.0 * g) * (nu + 1.0) * ((2.0 * (nu + 1.0) - g) * k + g).powf(p));
            Ok(BoundValue::plain(v, Normalization::GapOverLnuDnu1))
        }
        BoundKind::LbGradnorm => {
            let g = rd.gamma_in(2.0, false, "0 < gamma < 2")?;
            let nu = rd.nu()?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let num = 2f64.powf((nu - 1.0) / 2.0)
                * g.powf((nu + 1.0) / 2.0)
                * (nu + 1.0).powf((nu - 1.0) / 2.0)
                * (4.0 - g).sqrt();
            let den = e.powf(g * nu)
                * (4.0 * (4.0 - g) + g * g).sqrt()
                * (2.0 * (nu + 1.0) - g).powf(nu / 2.0)
                * k.powf(nu / 2.0);
            Ok(BoundValue::plain(num / den, Normalization::GradnormOverLnuDhalf))
        }
        _ => unreachable!(),
    }
}

fn floor_even(k: u64) -> (u64, Option<u64>) {
    if k % 2 == 0 {
        (k, None)
    } else {
        (k - 1, Some(k - 1))
    }
}

/// Evaluates one of the upper bounds.
pub fn upper_bound(query: &BoundQuery) -> Result<BoundValue, TheoryError> {
    if query.kind.is_lower() {
        return Err(TheoryError::WrongDirection {
            kind: query.kind.as_str(),
            expected: "upper",
        });
    }
    let rd = Reader {
        kind: query.kind.as_str(),
        p: &query.params,
    };
    match query.kind {
        BoundKind::UbGrowthLinear | BoundKind::UbGrowthSublinear => growth_bound(query.kind, &rd),
        BoundKind::Ub2Polyak => {
            let nu = rd.nu()?;
            let l = rd.positive("L", rd.p.l)?;
            let d0 = rd.nonnegative("D0", rd.p.dist0)?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let v = ((nu + 1.0) / (4.0 * nu)).powf(nu) * l * d0.powf(nu + 1.0) / k.powf(nu);
            Ok(BoundValue::plain(v, Normalization::AbsoluteGap))
        }
        BoundKind::UbGradnorm => {
            let g = rd.gamma_in(2.0, true, "0 < gamma <= 2")?;
            let nu = rd.nu()?;
            let l = rd.positive("L", rd.p.l)?;
            let d0 = rd.nonnegative("D0", rd.p.dist0)?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let v = (nu + 1.0).powf(nu) * l * d0.powf(nu)
                / (2f64.powf(nu / 2.0) * g.powf(nu / 2.0) * nu.powf(nu) * k.powf(nu / 2.0));
            Ok(BoundValue::plain(v, Normalization::AbsoluteGradnorm))
        }
        BoundKind::UbGcb => {
            rd.gamma_in(2.0, false, "0 < gamma < 2")?;
            let d0 = rd.nonnegative("D0", rd.p.dist0)?;
            let k = rd.horizon(1, "K >= 1")? as f64;
            let mu = rd.p.curvature.as_ref().ok_or(TheoryError::Missing {
                kind: rd.kind,
                name: "curvature",
            })?;
            let arg = match rd.p.gcb_variant {
                GcbVariant::Linear => 3.0 * d0 / k.sqrt(),
                GcbVariant::Squared => 3.0 * d0 * d0 / k.sqrt(),
            };
            let v = mu.eval(arg);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(rd.domain("curvature", v, "finite nonnegative curvature value"));
            }
            Ok(BoundValue::plain(v, Normalization::AbsoluteGap))
        }
        _ => unreachable!(),
    }
}

fn growth_bound(kind: BoundKind, rd: &Reader<'_>) -> Result<BoundValue, TheoryError> {
    let g = rd.gamma_in(2.0, false, "0 < gamma < 2")?;
    let nu = rd.nu()?;
    let r = rd.get("r", rd.p.r)?;
    if r < nu + 1.0 {
        return Err(TheoryError::Incompatible { r, nu });
    }
    let l = rd.positive("L", rd.p.l)?;
    let rho = rd.positive("rho", rd.p.rho)?;
    let linear = r == nu + 1.0;
    if kind == BoundKind::UbGrowthLinear && !linear {
        return Err(rd.domain("r", r, "r = nu + 1"));
    }
    if linear {
        let d0 = rd.nonnegative("D0", rd.p.dist0)?;
        let big_g = rd.nonnegative("G", rd.p.grad_sup)?;
        let (k, adjusted) = floor_even(rd.horizon(1, "K >= 1")?);
        let q = 2.0 * nu / (nu + 1.0);
        let c = g * (2.0 - g) * nu.powf(q) * rho.powf(2.0 / (nu + 1.0)) / ((nu + 1.0).powf(q) * l.powf(2.0 / (nu + 1.0)));
        if c >= 1.0 {
            return Err(TheoryError::NoContraction { c });
        }
        let v = pow_int(1.0 - c, k / 2) * big_g * d0;
        return Ok(BoundValue {
            value: v,
            normalization: Normalization::AbsoluteGap,
            adjusted_horizon: adjusted,
        });
    }
    let (k, adjusted) = floor_even(rd.horizon(2, "K >= 2")?);
    let k = k as f64;
    let n1 = nu + 1.0;
    let e = n1 - r;
    let ln = (r - n1).ln() * n1 * n1 / (2.0 * e)
        + (g * (2.0 - g)).ln() * r * n1 / (2.0 * e)
        + nu.ln() * nu * r / e
        - 2f64.ln() * r * n1 / (2.0 * e)
        - n1.ln() * (n1 * n1 + 2.0 * nu * r) / (2.0 * e)
        + l.ln() * r / (r - n1)
        - rho.ln() * n1 / (r - n1)
        - k.ln() * r * n1 / (2.0 * (r - n1));
    Ok(BoundValue {
        value: ln.exp(),
        normalization: Normalization::AbsoluteGap,
        adjusted_horizon: adjusted,
    })
}

/// `(a₀^{1−τ} + (τ−1) c k)^{−1/(τ−1)}`, an upper envelope for any
/// nonnegative sequence with `a_{k+1} ≤ a_k − c a_k^τ`.
pub fn recursion_envelope(a0: f64, c: f64, tau: f64, k: u64) -> Result<f64, TheoryError> {
    let dom = |name, value, condition| TheoryError::Domain {
        kind: "recursion_envelope",
        name,
        value,
        condition,
    };
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(dom("tau", tau, "tau > 1"));
    }
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(dom("a0", a0, "a0 > 0"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(dom("c", c, "c > 0"));
    }
    let s = c * a0.powf(tau - 1.0);
    if !(s < 1.0) {
        return Err(dom("c", c, "c * a0^(tau - 1) < 1"));
    }
    if k == 0 {
        return Ok(a0);
    }
    Ok((a0.powf(1.0 - tau) + (tau - 1.0) * c * k as f64).powf(-1.0 / (tau - 1.0)))
}

/// The three members of the chain `lhs ≥ mid ≥ rhs` relating the worst-case
/// contraction over `K` steps to `e^{−2γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainValues {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
}

pub fn lemma_a1_margin(gamma: f64, horizon: u64) -> ChainValues {
    let k = horizon as f64;
    let base = (8.0 * k - 2.0 * (1.0 + k) * gamma + gamma * gamma) / (2.0 * k * (4.0 - gamma) + 2.0 * gamma);
    ChainValues {
        lhs: pow_int(base, 2 * horizon),
        mid: pow_int(k / (gamma + k), 2 * horizon),
        rhs: (-2.0 * gamma).exp(),
    }
}

/// Normalised best-iterate gap of γ-PolyakGD on the worst-case quadratic
/// with `κ = 4K/γ + γ/(4−γ)` and a unit-sphere start.
pub fn worstcase_normalized_gap(gamma: f64, horizon: u64) -> f64 {
    let k = horizon as f64;
    let chain = lemma_a1_margin(gamma, horizon);
    chain.lhs * gamma / (2.0 * ((4.0 - gamma) * k + gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `ln value = exponent · ln K + intercept`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit, TheoryError> {
    if points.len() < 3 {
        return Err(TheoryError::TooFewPoints(points.len()));
    }
    if let Some(&(k, value)) = points.iter().find(|(k, v)| !(*k > 0.0 && *v > 0.0)) {
        return Err(TheoryError::NonPositivePoint { k, value });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(TheoryError::DegenerateAbscissae);
    }
    let exponent = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        exponent,
        intercept: my - exponent * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(kind: BoundKind, f: impl FnOnce(&mut BoundParams)) -> BoundQuery {
        let mut p = BoundParams::default();
        f(&mut p);
        BoundQuery::new(kind, p)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn lb_smooth_example() {
        let v = lower_bound(&q(BoundKind::LbSmooth, |p| {
            p.gamma = Some(1.0);
            p.horizon = Some(10);
        }))
        .unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!(rel(v.value, 1.0 / (62.0 * e2)) < 1e-14);
        assert!((v.value - 2.1832e-3).abs() < 1e-6);
        assert_eq!(v.normalization, Normalization::GapOverLD2);
    }

    #[test]
    fn lb_strong_example() {
        let v = lower_bound(&q(BoundKind::LbStrong, |p| {
            p.kappa = Some(5.0);
            p.horizon = Some(1);
        }))
        .unwrap();
        assert!(rel(v.value, 4.0 / 9.0) < 1e-15);
    }

    #[test]
    fn lb_holder_at_nu_one_matches_lb_smooth() {
        for g in [0.5, 1.0, 1.5] {
            let a = lower_bound(&q(BoundKind::LbHolder, |p| {
                p.gamma = Some(g);
                p.nu = Some(1.0);
                p.horizon = Some(10);
            }))
            .unwrap();
            let b = lower_bound(&q(BoundKind::LbSmooth, |p| {
                p.gamma = Some(g);
                p.horizon = Some(10);
            }))
            .unwrap();
            assert!(rel(a.value, b.value) < 1e-14, "gamma={g}");
        }
    }

    #[test]
    fn upper_bound_examples() {
        let v = upper_bound(&q(BoundKind::Ub2Polyak, |p| {
            p.nu = Some(1.0);
            p.l = Some(1.0);
            p.dist0 = Some(1.0);
            p.horizon = Some(4);
        }))
        .unwrap();
        assert!(rel(v.value, 0.125) < 1e-15);
        let v = upper_bound(&q(BoundKind::UbGradnorm, |p| {
            p.gamma = Some(2.0);
            p.nu = Some(1.0);
            p.l = Some(1.0);
            p.dist0 = Some(1.0);
            p.horizon = Some(4);
        }))
        .unwrap();
        assert!(rel(v.value, 0.5) < 1e-15);
    }

    fn growth(kind: BoundKind, r: f64, k: u64) -> Result<BoundValue, TheoryError> {
        upper_bound(&q(kind, |p| {
            p.gamma = Some(1.0);
            p.nu = Some(1.0);
            p.r = Some(r);
            p.l = Some(2.0);
            p.rho = Some(0.5);
            p.dist0 = Some(1.0);
            p.grad_sup = Some(2.0);
            p.horizon = Some(k);
        }))
    }

    #[test]
    fn growth_linear_value_and_odd_horizon() {
        // c = 1·1·0.5/(2·2) = 1/8
        let v = growth(BoundKind::UbGrowthLinear, 2.0, 6).unwrap();
        assert!(rel(v.value, 2.0 * (7.0f64 / 8.0).powi(3)) < 1e-14);
        assert_eq!(v.adjusted_horizon, None);
        let w = growth(BoundKind::UbGrowthLinear, 2.0, 7).unwrap();
        assert_eq!(w.adjusted_horizon, Some(6));
        assert_eq!(w.value, v.value);
    }

    #[test]
    fn growth_routing_and_compatibility() {
        let a = growth(BoundKind::UbGrowthSublinear, 2.0, 6).unwrap();
        let b = growth(BoundKind::UbGrowthLinear, 2.0, 6).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            growth(BoundKind::UbGrowthLinear, 3.0, 6),
            Err(TheoryError::Domain { name: "r", .. })
        ));
        assert!(matches!(
            growth(BoundKind::UbGrowthSublinear, 1.5, 6),
            Err(TheoryError::Incompatible { .. })
        ));
    }

    #[test]
    fn growth_sublinear_has_expected_rate() {
        // ν = 1, r = 4: exponent −r(ν+1)/(2(r−ν−1)) = −2.
        let a = growth(BoundKind::UbGrowthSublinear, 4.0, 10).unwrap().value;
        let b = growth(BoundKind::UbGrowthSublinear, 4.0, 20).unwrap().value;
        assert!(rel(a / b, 4.0) < 1e-12);
    }

    #[test]
    fn growth_sublinear_matches_direct_product() {
        // Same expression evaluated factor by factor with powf.
        let (g, nu, r, l, rho, k): (f64, f64, f64, f64, f64, f64) = (0.7, 0.6, 2.5, 3.0, 0.4, 8.0);
        let n1 = nu + 1.0;
        let e = n1 - r;
        let num = (r - n1).powf(n1 * n1 / (2.0 * e)) * (g * (2.0 - g)).powf(r * n1 / (2.0 * e)) * nu.powf(nu * r / e);
        let den = 2f64.powf(r * n1 / (2.0 * e)) * n1.powf((n1 * n1 + 2.0 * nu * r) / (2.0 * e));
        let tail = l.powf(r / (r - n1)) / (rho.powf(n1 / (r - n1)) * k.powf(r * n1 / (2.0 * (r - n1))));
        let expected = num / den * tail;
        let v = upper_bound(&q(BoundKind::UbGrowthSublinear, |p| {
            p.gamma = Some(g);
            p.nu = Some(nu);
            p.r = Some(r);
            p.l = Some(l);
            p.rho = Some(rho);
            p.horizon = Some(8);
        }))
        .unwrap();
        assert!(rel(v.value, expected) < 1e-12);
    }

    #[test]
    fn domain_errors_name_condition() {
        let err = lower_bound(&q(BoundKind::LbSmooth, |p| {
            p.gamma = Some(4.0);
            p.horizon = Some(1);
        }))
        .unwrap_err();
        assert!(err.to_string().contains("0 < gamma < 4"));
        assert!(matches!(
            lower_bound(&q(BoundKind::LbHolder, |p| {
                p.gamma = Some(1.0);
                p.nu = Some(0.0);
                p.horizon = Some(1);
            })),
            Err(TheoryError::Domain { name: "nu", .. })
        ));
        assert!(matches!(
            lower_bound(&q(BoundKind::LbSmooth, |p| p.gamma = Some(1.0))),
            Err(TheoryError::Missing { name: "K", .. })
        ));
        assert!(upper_bound(&q(BoundKind::LbSmooth, |_| {})).is_err());
    }

    #[test]
    fn gcb_variants() {
        let mu = CurvatureFn::new(|t| t * t);
        let mk = |variant| {
            upper_bound(&q(BoundKind::UbGcb, |p| {
                p.gamma = Some(1.0);
                p.dist0 = Some(2.0);
                p.horizon = Some(9);
                p.curvature = Some(mu.clone());
                p.gcb_variant = variant;
            }))
            .unwrap()
            .value
        };
        assert!(rel(mk(GcbVariant::Linear), 4.0) < 1e-15);
        assert!(rel(mk(GcbVariant::Squared), 16.0) < 1e-15);
    }

    #[test]
    fn envelope_examples() {
        assert!(rel(recursion_envelope(1.0, 0.1, 2.0, 10).unwrap(), 0.5) < 1e-15);
        assert_eq!(recursion_envelope(0.3, 0.1, 1.5, 0).unwrap(), 0.3);
        assert!(recursion_envelope(1.0, 0.1, 1.0, 3).is_err());
        assert!(recursion_envelope(1.0, 2.0, 2.0, 3).is_err());
    }

    #[test]
    fn envelope_dominates_iteration() {
        let mut a: f64 = 1.0;
        for k in 0..=1000u64 {
            assert!(a <= recursion_envelope(1.0, 0.1, 2.0, k).unwrap() * (1.0 + 1e-14));
            a -= 0.1 * a * a;
        }
    }

    #[test]
    fn chain_example() {
        let c = lemma_a1_margin(1.0, 10);
        assert!(rel(c.lhs, (59.0f64 / 62.0).powi(20)) < 1e-13);
        assert!((c.lhs - 0.3709).abs() < 1e-4);
        assert!((c.mid - 0.1486).abs() < 1e-4);
        assert!((c.rhs - 0.1353).abs() < 1e-4);
        let d = lemma_a1_margin(3.9, 1);
        assert!(d.lhs >= d.mid && d.mid >= d.rhs);
    }

    #[test]
    fn chain_mid_approaches_rhs() {
        let c = lemma_a1_margin(1.0, 1_000_000);
        assert!(c.mid > c.rhs && c.mid - c.rhs < 1e-6);
    }

    #[test]
    fn rate_fit_basics() {
        let pts: Vec<_> = (1..=10).map(|k| (k as f64, 3.0 / k as f64)).collect();
        let fit = rate_fit(&pts).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let flat: Vec<_> = (1..=5).map(|k| (k as f64, 2.0)).collect();
        let fit = rate_fit(&flat).unwrap();
        assert_eq!(fit.exponent, 0.0);
        assert!(rate_fit(&pts[..2]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(rate_fit(&[(2.0, 1.0), (2.0, 3.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn lb_smooth_rate() {
        let pts: Vec<_> = (10..=100)
            .map(|k| {
                let v = lower_bound(&q(BoundKind::LbSmooth, |p| {
                    p.gamma = Some(1.0);
                    p.horizon = Some(k);
                }))
                .unwrap()
                .value;
                (k as f64, v)
            })
            .collect();
        let e = rate_fit(&pts).unwrap().exponent;
        assert!((-1.05..=-0.95).contains(&e), "exponent {e}");
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BoundKind::ALL {
            assert_eq!(k.as_str().parse::<BoundKind>().unwrap(), k);
        }
    }
}
