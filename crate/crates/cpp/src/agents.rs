//! Agent abstraction. Every agent exposes exactly one of three interfaces:
//!
//! - **primal**: probed with a tentative plan, returns value and gradient;
//! - **dual**: consumes a price, returns the plan minimizing `g(x) - lambda' x`;
//! - **proximal**: consumes price, consensus plan, and a rate, returns the
//!   minimizer of the augmented subproblem `g(x) - lambda' x + rho/2 ||z - x||^2`.
//!
//! The coordinator consumes agents only through these oracles. Concrete
//! quadratic agents (`g(x) = 1/2 x' Q x + b' x`) answer all three in closed
//! form; arbitrary objectives plug in through [`OracleBundle`].

use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::numerics::{
    extreme_eigenvalue_bounds, symmetric_eigenvalues, CholeskyFactor, SymmetricMatrix, Vector,
};
use crate::scalar::{cst, Scalar};

/// The three interface kinds an agent can expose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Primal,
    Dual,
    Proximal,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Primal => "primal",
            AgentKind::Dual => "dual",
            AgentKind::Proximal => "proximal",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A quadratic cost `1/2 x' Q x + b' x` with cached factorizations and
/// curvature bounds. `Q` must be positive definite; `mu` and `beta` are its
/// extreme eigenvalues, computed at construction so they cannot drift from
/// the data.
#[derive(Debug)]
pub struct QuadraticObjective<T> {
    q: SymmetricMatrix<T>,
    b: Vector<T>,
    mu: T,
    beta: T,
    chol: Arc<CholeskyFactor<T>>,
    // (Q + rho I) factorizations keyed by rho; populated once per distinct
    // rho, then shared.
    shifted: Mutex<Vec<(T, Arc<CholeskyFactor<T>>)>>,
}

impl<T: Clone> Clone for QuadraticObjective<T> {
    fn clone(&self) -> Self {
        let shifted = self.shifted.lock().expect("poisoned factorization cache").clone();
        Self {
            q: self.q.clone(),
            b: self.b.clone(),
            mu: self.mu.clone(),
            beta: self.beta.clone(),
            chol: Arc::clone(&self.chol),
            shifted: Mutex::new(shifted),
        }
    }
}

impl<T: Scalar> QuadraticObjective<T> {
    pub fn new(q: SymmetricMatrix<T>, b: Vector<T>) -> Result<Self> {
        if b.len() != q.dim() {
            return Err(Error::DimensionMismatch { expected: q.dim(), got: b.len() });
        }
        if q.dim() == 0 {
            return Err(Error::InvalidConfig("objective dimension must be >= 1".into()));
        }
        let chol = Arc::new(CholeskyFactor::factor(&q)?);
        let (mu, beta) = extreme_eigenvalue_bounds(&q);
        if mu <= T::zero() {
            return Err(Error::NotPositiveDefinite {
                index: 0,
                pivot: mu.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { q, b, mu, beta, chol, shifted: Mutex::new(Vec::new()) })
    }

    /// Convenience constructor for one-dimensional agents.
    pub fn scalar(q: T, b: T) -> Result<Self> {
        Self::new(SymmetricMatrix::diagonal(&[q]), Vector::new(vec![b])?)
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &SymmetricMatrix<T> {
        &self.q
    }

    pub fn b(&self) -> &Vector<T> {
        &self.b
    }

    /// Strong-convexity bound (smallest eigenvalue of `Q`).
    pub fn mu(&self) -> T {
        self.mu
    }

    /// Gradient-Lipschitz bound (largest eigenvalue of `Q`).
    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn value(&self, x: &Vector<T>) -> Result<T> {
        Ok(cst::<T>(0.5) * self.q.quadratic_form(x)? + self.b.dot(x))
    }

    pub fn gradient(&self, x: &Vector<T>) -> Result<Vector<T>> {
        Ok(self.q.matvec(x)?.add(&self.b))
    }

    /// `Q^{-1} rhs` through the cached factorization.
    pub fn solve_q(&self, rhs: &Vector<T>) -> Result<Vector<T>> {
        self.chol.solve(rhs)
    }

    /// `(Q + rho I)^{-1} rhs`; the factorization is computed once per
    /// distinct `rho` and cached.
    pub fn solve_shifted(&self, rho: T, rhs: &Vector<T>) -> Result<Vector<T>> {
        let factor = self.shifted_factor(rho)?;
        factor.solve(rhs)
    }

    fn shifted_factor(&self, rho: T) -> Result<Arc<CholeskyFactor<T>>> {
        let mut cache = self.shifted.lock().expect("poisoned factorization cache");
        if let Some((_, f)) = cache.iter().find(|(r, _)| *r == rho) {
            return Ok(Arc::clone(f));
        }
        let factor = Arc::new(CholeskyFactor::factor(&self.q.add_scaled_identity(rho))?);
        cache.push((rho, Arc::clone(&factor)));
        Ok(factor)
    }

    /// Convex conjugate `g*(lambda) = 1/2 (lambda - b)' Q^{-1} (lambda - b)`.
    pub fn conjugate_value(&self, lambda: &Vector<T>) -> Result<T> {
        let d = lambda.sub(&self.b);
        Ok(cst::<T>(0.5) * self.chol.solve(&d)?.dot(&d))
    }

    /// Bregman divergence of the conjugate:
    /// `1/2 (u - v)' Q^{-1} (u - v)`.
    pub fn conjugate_bregman(&self, u: &Vector<T>, v: &Vector<T>) -> Result<T> {
        let d = u.sub(v);
        Ok(cst::<T>(0.5) * self.chol.solve(&d)?.dot(&d))
    }
}

type ValueFn<T> = dyn Fn(&Vector<T>) -> T + Send + Sync;
type VectorFn<T> = dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync;
type ProxFn<T> = dyn Fn(&Vector<T>, &Vector<T>, T) -> Vector<T> + Send + Sync;
type HessianFn<T> = dyn Fn(&Vector<T>) -> SymmetricMatrix<T> + Send + Sync;

/// User-supplied oracle callbacks for non-quadratic agents. This is the
/// stable extension contract: each callback must be deterministic for fixed
/// inputs, and the curvature bounds `mu` and `beta` must be supplied by the
/// user (they cannot be derived from callbacks).
///
/// Only the callbacks matching the agent's interface kind are required:
/// `gradient` for primal agents, `conjugate_argmin` for dual agents, and
/// `prox` for proximal agents. `hessian` enables the second-order variants.
#[derive(Clone)]
pub struct OracleBundle<T> {
    pub dim: usize,
    pub value: Arc<ValueFn<T>>,
    pub gradient: Option<Arc<VectorFn<T>>>,
    /// `lambda -> argmin_x g(x) - lambda' x`.
    pub conjugate_argmin: Option<Arc<VectorFn<T>>>,
    /// `(lambda, z, rho) -> argmin_x g(x) - lambda' x + rho/2 ||z - x||^2`.
    pub prox: Option<Arc<ProxFn<T>>>,
    pub hessian: Option<Arc<HessianFn<T>>>,
    /// Strong-convexity bound; may be zero for merely convex objectives.
    pub mu: T,
    /// Gradient-Lipschitz bound.
    pub beta: T,
}

impl<T> std::fmt::Debug for OracleBundle<T>
where
    T: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleBundle")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("conjugate_argmin", &self.conjugate_argmin.is_some())
            .field("prox", &self.prox.is_some())
            .field("hessian", &self.hessian.is_some())
            .field("mu", &self.mu)
            .field("beta", &self.beta)
            .finish()
    }
}

/// An agent's objective: either a concrete quadratic or a user oracle bundle.
#[derive(Clone, Debug)]
pub enum Objective<T> {
    Quadratic(QuadraticObjective<T>),
    Oracle(OracleBundle<T>),
}

impl<T: Scalar> Objective<T> {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.dim(),
            Objective::Oracle(o) => o.dim,
        }
    }

    pub fn mu(&self) -> T {
        match self {
            Objective::Quadratic(q) => q.mu(),
            Objective::Oracle(o) => o.mu,
        }
    }

    pub fn beta(&self) -> T {
        match self {
            Objective::Quadratic(q) => q.beta(),
            Objective::Oracle(o) => o.beta,
        }
    }
}

/// One agent: its interface kind, objective, learning rate, and the
/// per-agent parameters of the update variants.
#[derive(Clone, Debug)]
pub struct AgentSpec<T> {
    kind: AgentKind,
    objective: Objective<T>,
    rho: T,
    /// Bregman majorant `L` for primal agents (`L >= beta`).
    majorant: Option<T>,
    /// Tighter quadratic bound `H >= Q` for primal agents, with its cached
    /// `(H + rho I)` factorization.
    tight_bound: Option<(SymmetricMatrix<T>, Arc<CholeskyFactor<T>>)>,
    /// Regularization weight for the two-step dual update.
    regularization: Option<T>,
    /// Epsilon for the Newton price update of dual agents.
    newton_epsilon: Option<T>,
}

/// Margin by which the default primal majorant exceeds `beta`.
const DEFAULT_MAJORANT_MARGIN: f64 = 1.01;
/// Scale-relative default for the Newton price-update epsilon.
const DEFAULT_NEWTON_EPSILON: f64 = 1e-6;
/// Eigenvalue slack allowed when checking `H >= Q`.
const DOMINANCE_TOLERANCE: f64 = 1e-10;

impl<T: Scalar> AgentSpec<T> {
    /// Primal agent with the default majorant `L = 1.01 beta` (the smallest
    /// safe margin above the gradient-Lipschitz bound).
    pub fn primal(objective: impl Into<Objective<T>>, rho: T) -> Result<Self> {
        let objective = objective.into();
        let l = cst::<T>(DEFAULT_MAJORANT_MARGIN) * objective.beta();
        Self::primal_with_majorant(objective, rho, l)
    }

    /// Primal agent with an explicit majorant; `L >= beta` is required for
    /// the linearized step to minimize an upper bound of the objective.
    pub fn primal_with_majorant(
        objective: impl Into<Objective<T>>,
        rho: T,
        majorant: T,
    ) -> Result<Self> {
        let objective = objective.into();
        check_rho(rho)?;
        let beta = objective.beta();
        if majorant.is_nan() || majorant < beta {
            return Err(Error::AssumptionViolated {
                what: format!(
                    "primal agent requires majorant L >= beta (L = {:?}, beta = {:?})",
                    majorant, beta
                ),
            });
        }
        Ok(Self {
            kind: AgentKind::Primal,
            objective,
            rho,
            majorant: Some(majorant),
            tight_bound: None,
            regularization: None,
            newton_epsilon: None,
        })
    }

    /// Dual agent; requires a strongly convex objective and `rho <= mu`
    /// (the dual-ascent step-size condition).
    pub fn dual(objective: impl Into<Objective<T>>, rho: T) -> Result<Self> {
        let objective = objective.into();
        check_rho(rho)?;
        let mu = objective.mu();
        if mu <= T::zero() {
            return Err(Error::AssumptionViolated {
                what: "dual agent requires a strongly convex objective (mu > 0)".into(),
            });
        }
        if rho > mu {
            return Err(Error::AssumptionViolated {
                what: format!("dual agent requires rho <= mu (rho = {:?}, mu = {:?})", rho, mu),
            });
        }
        Ok(Self {
            kind: AgentKind::Dual,
            objective,
            rho,
            majorant: None,
            tight_bound: None,
            regularization: None,
            newton_epsilon: None,
        })
    }

    /// Proximal agent; any `rho > 0` is admissible.
    pub fn proximal(objective: impl Into<Objective<T>>, rho: T) -> Result<Self> {
        let objective = objective.into();
        check_rho(rho)?;
        Ok(Self {
            kind: AgentKind::Proximal,
            objective,
            rho,
            majorant: None,
            tight_bound: None,
            regularization: None,
            newton_epsilon: None,
        })
    }

    /// Attaches a tighter quadratic bound `H` (primal agents only). For
    /// quadratic objectives, `H - Q` must be positive semidefinite within
    /// tolerance.
    pub fn with_tight_bound(mut self, h: SymmetricMatrix<T>) -> Result<Self> {
        if self.kind != AgentKind::Primal {
            return Err(Error::WrongKind {
                operation: "with_tight_bound",
                required: "primal",
                actual: self.kind.name(),
            });
        }
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: h.dim() });
        }
        if let Objective::Quadratic(q) = &self.objective {
            let gap = h.sub(q.q())?;
            let eigs = symmetric_eigenvalues(&gap);
            if let Some(&min) = eigs.first() {
                if min < -cst::<T>(DOMINANCE_TOLERANCE) {
                    return Err(Error::DominanceViolated {
                        eigenvalue: min.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        let solver = Arc::new(CholeskyFactor::factor(&h.add_scaled_identity(self.rho))?);
        self.tight_bound = Some((h, solver));
        Ok(self)
    }

    /// Enables the two-step regularized update for a dual agent: solve the
    /// dual subproblem, then average the result with the consensus plan with
    /// weight `L` (default `beta`). Requires `rho (L - mu) <= mu L`, the
    /// condition under which the blended step remains a valid dual-ascent
    /// step.
    pub fn with_regularized_dual(mut self, l: Option<T>) -> Result<Self> {
        if self.kind != AgentKind::Dual {
            return Err(Error::WrongKind {
                operation: "with_regularized_dual",
                required: "dual",
                actual: self.kind.name(),
            });
        }
        let l = l.unwrap_or_else(|| self.objective.beta());
        if l <= T::zero() {
            return Err(Error::InvalidConfig("regularization weight L must be > 0".into()));
        }
        let mu = self.objective.mu();
        if self.rho * (l - mu) > mu * l {
            return Err(Error::AssumptionViolated {
                what: format!(
                    "regularized dual update requires rho (L - mu) <= mu L (rho = {:?}, L = {:?}, mu = {:?})",
                    self.rho, l, mu
                ),
            });
        }
        self.regularization = Some(l);
        Ok(self)
    }

    /// Enables the Newton price update for a dual agent, with curvature
    /// correction `epsilon` (default `1e-6 beta`, scale-relative).
    pub fn with_second_order(mut self, epsilon: Option<T>) -> Result<Self> {
        if self.kind != AgentKind::Dual {
            return Err(Error::WrongKind {
                operation: "with_second_order",
                required: "dual",
                actual: self.kind.name(),
            });
        }
        if let Objective::Oracle(o) = &self.objective {
            if o.hessian.is_none() {
                return Err(Error::HessianUnavailable);
            }
        }
        let eps = epsilon.unwrap_or_else(|| cst::<T>(DEFAULT_NEWTON_EPSILON) * self.objective.beta());
        if eps < T::zero() {
            return Err(Error::InvalidConfig("newton epsilon must be >= 0".into()));
        }
        self.newton_epsilon = Some(eps);
        Ok(self)
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn mu(&self) -> T {
        self.objective.mu()
    }

    pub fn beta(&self) -> T {
        self.objective.beta()
    }

    pub fn majorant(&self) -> Option<T> {
        self.majorant
    }

    pub fn regularization(&self) -> Option<T> {
        self.regularization
    }

    pub fn newton_epsilon(&self) -> Option<T> {
        self.newton_epsilon
    }

    pub fn objective(&self) -> &Objective<T> {
        &self.objective
    }

    pub fn quadratic(&self) -> Option<&QuadraticObjective<T>> {
        match &self.objective {
            Objective::Quadratic(q) => Some(q),
            Objective::Oracle(_) => None,
        }
    }

    pub fn tight_bound(&self) -> Option<&SymmetricMatrix<T>> {
        self.tight_bound.as_ref().map(|(h, _)| h)
    }

    pub(crate) fn tight_bound_solver(&self) -> Option<&Arc<CholeskyFactor<T>>> {
        self.tight_bound.as_ref().map(|(_, s)| s)
    }

    /// Hessian of the linearization potential `phi` for primal agents:
    /// `L I - Q` by default, `H - Q` when a tighter bound has been attached
    /// and `use_tight` is set. `None` for dual/proximal agents (`phi = 0`).
    pub fn phi_hessian(&self, use_tight: bool) -> Result<Option<SymmetricMatrix<T>>> {
        if self.kind != AgentKind::Primal {
            return Ok(None);
        }
        let q = self
            .quadratic()
            .ok_or(Error::OracleUnavailable { what: "phi hessian of a non-quadratic agent" })?;
        let h = if use_tight {
            match self.tight_bound() {
                Some(h) => h.sub(q.q())?,
                // Q itself is the tightest admissible bound, making phi linear.
                None => SymmetricMatrix::scaled_identity(self.dim(), T::zero()),
            }
        } else {
            let l = self.majorant.expect("primal agents always carry a majorant");
            SymmetricMatrix::scaled_identity(self.dim(), l).sub(q.q())?
        };
        Ok(Some(h))
    }

    /// Hessian of the objective at `x` (constant `Q` for quadratics).
    pub fn hessian_at(&self, x: &Vector<T>) -> Result<SymmetricMatrix<T>> {
        match &self.objective {
            Objective::Quadratic(q) => Ok(q.q().clone()),
            Objective::Oracle(o) => match &o.hessian {
                Some(h) => Ok(h(x)),
                None => Err(Error::HessianUnavailable),
            },
        }
    }

    /// Objective value `g(x)`.
    pub fn objective_value(&self, x: &Vector<T>) -> Result<T> {
        self.check_dim(x)?;
        match &self.objective {
            Objective::Quadratic(q) => q.value(x),
            Objective::Oracle(o) => Ok((o.value)(x)),
        }
    }

    /// Primal interface: value and gradient at the proposed plan.
    pub fn primal_oracle(&self, x: &Vector<T>) -> Result<(T, Vector<T>)> {
        self.check_kind(AgentKind::Primal, "primal_oracle")?;
        self.check_dim(x)?;
        match &self.objective {
            Objective::Quadratic(q) => Ok((q.value(x)?, q.gradient(x)?)),
            Objective::Oracle(o) => {
                let grad = o
                    .gradient
                    .as_ref()
                    .ok_or(Error::OracleUnavailable { what: "gradient callback" })?;
                Ok(((o.value)(x), grad(x)))
            }
        }
    }

    /// Dual interface: `argmin_x g(x) - lambda' x`; `Q^{-1} (lambda - b)`
    /// for quadratics.
    pub fn dual_oracle(&self, lambda: &Vector<T>) -> Result<Vector<T>> {
        self.check_kind(AgentKind::Dual, "dual_oracle")?;
        self.check_dim(lambda)?;
        match &self.objective {
            Objective::Quadratic(q) => q.solve_q(&lambda.sub(q.b())),
            Objective::Oracle(o) => {
                let f = o
                    .conjugate_argmin
                    .as_ref()
                    .ok_or(Error::OracleUnavailable { what: "conjugate_argmin callback" })?;
                Ok(f(lambda))
            }
        }
    }

    /// Proximal interface:
    /// `argmin_x g(x) - lambda' x + rho/2 ||z - x||^2`;
    /// `(Q + rho I)^{-1} (rho z + lambda - b)` for quadratics.
    pub fn proximal_oracle(&self, lambda: &Vector<T>, z: &Vector<T>, rho: T) -> Result<Vector<T>> {
        self.check_kind(AgentKind::Proximal, "proximal_oracle")?;
        self.check_dim(lambda)?;
        self.check_dim(z)?;
        check_rho(rho)?;
        match &self.objective {
            Objective::Quadratic(q) => {
                let rhs = z.scaled(rho).add(lambda).sub(q.b());
                q.solve_shifted(rho, &rhs)
            }
            Objective::Oracle(o) => {
                let f = o.prox.as_ref().ok_or(Error::OracleUnavailable { what: "prox callback" })?;
                Ok(f(lambda, z, rho))
            }
        }
    }

    fn check_kind(&self, required: AgentKind, operation: &'static str) -> Result<()> {
        if self.kind != required {
            return Err(Error::WrongKind {
                operation,
                required: required.name(),
                actual: self.kind.name(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, v: &Vector<T>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }
}

impl<T: Scalar> From<QuadraticObjective<T>> for Objective<T> {
    fn from(q: QuadraticObjective<T>) -> Self {
        Objective::Quadratic(q)
    }
}

impl<T: Scalar> From<OracleBundle<T>> for Objective<T> {
    fn from(o: OracleBundle<T>) -> Self {
        Objective::Oracle(o)
    }
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if rho <= T::zero() || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!("rho must be > 0, got {rho:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec64(entries: &[f64]) -> Vector<f64> {
        Vector::new(entries.to_vec()).unwrap()
    }

    fn scalar_obj(q: f64, b: f64) -> QuadraticObjective<f64> {
        QuadraticObjective::scalar(q, b).unwrap()
    }

    #[test]
    fn objective_value_examples() {
        let zero = AgentSpec::proximal(scalar_obj(1.0, 0.0), 1.0).unwrap();
        assert_eq!(zero.objective_value(&vec64(&[0.0])).unwrap(), 0.0);

        let a = AgentSpec::proximal(scalar_obj(2.0, 1.0), 1.0).unwrap();
        assert_eq!(a.objective_value(&vec64(&[1.0])).unwrap(), 2.0);

        let b = AgentSpec::proximal(scalar_obj(1.0, -3.0), 1.0).unwrap();
        assert_eq!(b.objective_value(&vec64(&[3.0])).unwrap(), -4.5);
    }

    #[test]
    fn curvature_bounds_match_eigenvalues() {
        let q = SymmetricMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let obj = QuadraticObjective::new(q, vec64(&[0.0, 0.0])).unwrap();
        assert!((obj.mu() - 1.0).abs() < 1e-10);
        assert!((obj.beta() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn primal_oracle_examples() {
        let a = AgentSpec::primal(scalar_obj(1.0, 0.0), 1.0).unwrap();
        let (v, g) = a.primal_oracle(&vec64(&[0.0])).unwrap();
        assert_eq!((v, g[0]), (0.0, 0.0));

        let b = AgentSpec::primal(scalar_obj(2.0, 1.0), 1.0).unwrap();
        let (_, g) = b.primal_oracle(&vec64(&[1.0])).unwrap();
        assert_eq!(g[0], 3.0);

        let q = SymmetricMatrix::diagonal(&[1.0, 4.0]);
        let obj = QuadraticObjective::new(q, vec64(&[0.0, 0.0])).unwrap();
        let c = AgentSpec::primal(obj, 1.0).unwrap();
        let (_, g) = c.primal_oracle(&vec64(&[1.0, 1.0])).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn dual_oracle_examples() {
        let a = AgentSpec::dual(scalar_obj(1.0, 0.0), 1.0).unwrap();
        assert_eq!(a.dual_oracle(&vec64(&[2.0])).unwrap()[0], 2.0);

        // lambda = b puts the minimizer at the origin.
        let b = AgentSpec::dual(scalar_obj(3.0, 0.5), 1.0).unwrap();
        assert_eq!(b.dual_oracle(&vec64(&[0.5])).unwrap()[0], 0.0);

        let c = AgentSpec::dual(scalar_obj(2.0, 1.0), 1.0).unwrap();
        assert!((c.dual_oracle(&vec64(&[3.0])).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_oracle_satisfies_optimality() {
        let q = SymmetricMatrix::new(2, vec![3.0, 1.0, 1.0, 2.0]).unwrap();
        let obj = QuadraticObjective::new(q.clone(), vec64(&[0.3, -0.4])).unwrap();
        let agent = AgentSpec::dual(obj, 1.0).unwrap();
        let lambda = vec64(&[1.5, -2.5]);
        let x = agent.dual_oracle(&lambda).unwrap();
        // gradient at the solution equals the price.
        let grad = q.matvec(&x).unwrap().add(&vec64(&[0.3, -0.4]));
        assert!(grad.sub(&lambda).norm() <= 1e-10 * (1.0 + lambda.norm()));
    }

    #[test]
    fn proximal_oracle_examples() {
        let a = AgentSpec::proximal(scalar_obj(1.0, 0.0), 1.0).unwrap();
        assert_eq!(
            a.proximal_oracle(&vec64(&[0.0]), &vec64(&[0.0]), 1.0).unwrap()[0],
            0.0
        );
        assert!(
            (a.proximal_oracle(&vec64(&[0.0]), &vec64(&[2.0]), 1.0).unwrap()[0] - 1.0).abs()
                < 1e-15
        );

        let b = AgentSpec::proximal(scalar_obj(3.0, -1.0), 1.0).unwrap();
        assert!(
            (b.proximal_oracle(&vec64(&[1.0]), &vec64(&[0.0]), 1.0).unwrap()[0] - 0.5).abs()
                < 1e-15
        );
    }

    #[test]
    fn wrong_kind_is_a_hard_error() {
        let prox = AgentSpec::proximal(scalar_obj(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            prox.dual_oracle(&vec64(&[1.0])),
            Err(Error::WrongKind { required: "dual", .. })
        ));
        let dual = AgentSpec::dual(scalar_obj(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            dual.primal_oracle(&vec64(&[1.0])),
            Err(Error::WrongKind { required: "primal", .. })
        ));
        assert!(matches!(
            dual.proximal_oracle(&vec64(&[1.0]), &vec64(&[0.0]), 1.0),
            Err(Error::WrongKind { required: "proximal", .. })
        ));
    }

    #[test]
    fn construction_rejects_bad_hyperparameters() {
        // Majorant below beta.
        assert!(matches!(
            AgentSpec::primal_with_majorant(scalar_obj(2.0, 0.0), 1.0, 1.9),
            Err(Error::AssumptionViolated { .. })
        ));
        // Majorant equal to beta is the boundary case and is admissible
        // (spherical objectives make the linearized step exact there).
        assert!(AgentSpec::primal_with_majorant(scalar_obj(2.0, 0.0), 1.0, 2.0).is_ok());
        // Dual step size above mu.
        assert!(matches!(
            AgentSpec::dual(scalar_obj(2.0, 0.0), 2.5),
            Err(Error::AssumptionViolated { .. })
        ));
        // Nonpositive rho.
        assert!(AgentSpec::proximal(scalar_obj(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn default_majorant_is_just_above_beta() {
        let agent = AgentSpec::primal(scalar_obj(2.0, 0.0), 1.0).unwrap();
        assert!((agent.majorant().unwrap() - 2.02).abs() < 1e-12);
    }

    #[test]
    fn shifted_factorization_cache_is_reused() {
        let obj = scalar_obj(2.0, 0.0);
        let a = obj.solve_shifted(1.0, &vec64(&[3.0])).unwrap();
        let b = obj.solve_shifted(1.0, &vec64(&[3.0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(obj.shifted.lock().unwrap().len(), 1);
        obj.solve_shifted(2.0, &vec64(&[4.0])).unwrap();
        assert_eq!(obj.shifted.lock().unwrap().len(), 2);
    }

    #[test]
    fn tight_bound_requires_dominance() {
        let q = SymmetricMatrix::diagonal(&[1.0, 4.0]);
        let obj = QuadraticObjective::new(q, vec64(&[0.0, 0.0])).unwrap();
        let ok = AgentSpec::primal(obj.clone(), 1.0)
            .unwrap()
            .with_tight_bound(SymmetricMatrix::diagonal(&[2.0, 5.0]));
        assert!(ok.is_ok());
        let bad = AgentSpec::primal(obj, 1.0)
            .unwrap()
            .with_tight_bound(SymmetricMatrix::diagonal(&[0.5, 5.0]));
        assert!(matches!(bad, Err(Error::DominanceViolated { .. })));
    }

    #[test]
    fn regularized_dual_validates_rate_condition() {
        // rho (L - mu) <= mu L holds for any dual agent (rho <= mu already
        // implies it); the constructor still validates it, plus L > 0.
        let ok = AgentSpec::dual(scalar_obj(1.0, 0.0), 1.0)
            .unwrap()
            .with_regularized_dual(None);
        assert_eq!(ok.unwrap().regularization(), Some(1.0));
        let explicit = AgentSpec::dual(scalar_obj(2.0, 0.0), 2.0)
            .unwrap()
            .with_regularized_dual(Some(1000.0));
        assert!(explicit.is_ok());
        let bad = AgentSpec::dual(scalar_obj(2.0, 0.0), 2.0)
            .unwrap()
            .with_regularized_dual(Some(0.0));
        assert!(matches!(bad, Err(Error::InvalidConfig(_))));
        // Only dual agents take the regularized update.
        let wrong = AgentSpec::proximal(scalar_obj(1.0, 0.0), 1.0)
            .unwrap()
            .with_regularized_dual(None);
        assert!(matches!(wrong, Err(Error::WrongKind { .. })));
    }

    #[test]
    fn oracle_bundle_roundtrip() {
        // A quadratic dressed up as a user bundle behaves like the native agent.
        let q = 2.0;
        let b = 1.0;
        let bundle = OracleBundle::<f64> {
            dim: 1,
            value: Arc::new(move |x| 0.5 * q * x[0] * x[0] + b * x[0]),
            gradient: Some(Arc::new(move |x| {
                Vector::new(vec![q * x[0] + b]).unwrap()
            })),
            conjugate_argmin: Some(Arc::new(move |l| {
                Vector::new(vec![(l[0] - b) / q]).unwrap()
            })),
            prox: Some(Arc::new(move |l, z, rho| {
                Vector::new(vec![(rho * z[0] + l[0] - b) / (q + rho)]).unwrap()
            })),
            hessian: None,
            mu: q,
            beta: q,
        };
        let native = AgentSpec::dual(scalar_obj(q, b), 1.0).unwrap();
        let wrapped = AgentSpec::dual(bundle, 1.0).unwrap();
        let lambda = vec64(&[3.0]);
        let from_native = native.dual_oracle(&lambda).unwrap();
        let from_bundle = wrapped.dual_oracle(&lambda).unwrap();
        assert!(from_native.max_abs_diff(&from_bundle) < 1e-15);
        assert_eq!(
            native.objective_value(&vec64(&[2.0])).unwrap(),
            wrapped.objective_value(&vec64(&[2.0])).unwrap()
        );
    }

    #[test]
    fn bundle_missing_callback_is_reported() {
        let bundle = OracleBundle::<f64> {
            dim: 1,
            value: Arc::new(|x| x[0] * x[0]),
            gradient: None,
            conjugate_argmin: None,
            prox: None,
            hessian: None,
            mu: 1.0,
            beta: 2.0,
        };
        let agent = AgentSpec::primal(bundle, 1.0).unwrap();
        assert!(matches!(
            agent.primal_oracle(&vec64(&[1.0])),
            Err(Error::OracleUnavailable { .. })
        ));
    }

    #[test]
    fn conjugate_identity_scalar() {
        // x' lambda = g(x) + g*(lambda) at x = dual_oracle(lambda).
        let obj = scalar_obj(2.0, 1.0);
        let agent = AgentSpec::dual(obj.clone(), 1.0).unwrap();
        let lambda = vec64(&[3.0]);
        let x = agent.dual_oracle(&lambda).unwrap();
        let lhs = x.dot(&lambda);
        let rhs = obj.value(&x).unwrap() + obj.conjugate_value(&lambda).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
