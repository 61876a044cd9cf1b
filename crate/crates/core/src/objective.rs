//! The objective abstraction shared by the optimizer, the certificate suite
//! and the CLI.

/// `(ν, L_ν)`: `‖∇f(x) − ∇f(y)‖ ≤ L_ν ‖x − y‖^ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderSmoothness {
    pub nu: f64,
    pub l_nu: f64,
}

/// `(r, ρ_r)`: `f(x) − f⋆ ≥ ρ_r dist(x, X⋆)^r` on a ball around the solution set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderGrowth {
    pub r: f64,
    pub rho: f64,
}

/// A convex (or, for negative tests, deliberately nonconvex) objective with
/// known optimal value.
///
/// Implementations are pure: evaluating never mutates state, so a single
/// objective can be shared across threads and runs.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient, or a subgradient at points of nondifferentiability.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn f_star(&self) -> f64 {
        0.0
    }

    /// A point of the solution set, when one is known in closed form.
    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// `dist(x, X⋆)` in closed form.
    fn dist_to_solution(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// `G = sup ‖∇f(x)‖` over the closed ball of the given radius around the
    /// solution set.
    fn grad_sup_on_region(&self, _radius: f64) -> Option<f64> {
        None
    }

    fn smoothness(&self) -> Option<HolderSmoothness> {
        None
    }

    /// Growth constants valid on the ball of the given radius around the
    /// solution set.
    fn growth(&self, _radius: f64) -> Option<HolderGrowth> {
        None
    }

    /// Largest Hessian eigenvalue for quadratic objectives.
    fn quadratic_curvature(&self) -> Option<f64> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn f_star(&self) -> f64 {
        (**self).f_star()
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        (**self).minimizer()
    }
    fn dist_to_solution(&self, x: &[f64]) -> Option<f64> {
        (**self).dist_to_solution(x)
    }
    fn grad_sup_on_region(&self, radius: f64) -> Option<f64> {
        (**self).grad_sup_on_region(radius)
    }
    fn smoothness(&self) -> Option<HolderSmoothness> {
        (**self).smoothness()
    }
    fn growth(&self, radius: f64) -> Option<HolderGrowth> {
        (**self).growth(radius)
    }
    fn quadratic_curvature(&self) -> Option<f64> {
        (**self).quadratic_curvature()
    }
}

/// A finite-sum problem `f(x) = (1/m) Σ f(x, i)` sampled uniformly.
pub trait StochasticProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn components(&self) -> usize;

    fn component_value(&self, x: &[f64], i: usize) -> f64;

    fn component_gradient(&self, x: &[f64], i: usize) -> Vec<f64>;

    /// `min_x f(x, i)`.
    fn component_f_star(&self, i: usize) -> f64;

    /// The common minimizer guaranteed by interpolation.
    fn common_minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    fn dist_to_solution(&self, x: &[f64]) -> Option<f64> {
        self.common_minimizer().map(|m| crate::linalg::dist(x, &m))
    }

    fn full_value(&self, x: &[f64]) -> f64 {
        let m = self.components();
        (0..m).map(|i| self.component_value(x, i)).sum::<f64>() / m as f64
    }

    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.components();
        let mut g = vec![0.0; self.dim()];
        for i in 0..m {
            for (acc, gi) in g.iter_mut().zip(self.component_gradient(x, i)) {
                *acc += gi;
            }
        }
        g.iter_mut().for_each(|v| *v /= m as f64);
        g
    }

    /// Under interpolation `f⋆ = E[f⋆_ξ]`.
    fn full_f_star(&self) -> f64 {
        let m = self.components();
        (0..m).map(|i| self.component_f_star(i)).sum::<f64>() / m as f64
    }
}

/// Views a deterministic objective as a one-component stochastic problem.
pub struct SingleComponent<'a, O: ?Sized>(pub &'a O);

impl<O: Objective + ?Sized> StochasticProblem for SingleComponent<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn components(&self) -> usize {
        1
    }
    fn component_value(&self, x: &[f64], _i: usize) -> f64 {
        self.0.value(x)
    }
    fn component_gradient(&self, x: &[f64], _i: usize) -> Vec<f64> {
        self.0.gradient(x)
    }
    fn component_f_star(&self, _i: usize) -> f64 {
        self.0.f_star()
    }
    fn common_minimizer(&self) -> Option<Vec<f64>> {
        self.0.minimizer()
    }
    fn dist_to_solution(&self, x: &[f64]) -> Option<f64> {
        self.0.dist_to_solution(x)
    }
    fn full_value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.0.gradient(x)
    }
    fn full_f_star(&self) -> f64 {
        self.0.f_star()
    }
}
