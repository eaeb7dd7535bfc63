//! Independent oracles for testing: a direct solve of the quadratic
//! consensus problem, and a first-order brute-force minimizer for the
//! unified per-agent subproblem. The brute-force path deliberately avoids
//! the closed forms used by the coordinator (no shifted-matrix solves), so
//! agreement between the two is a genuine cross-check.

use crate::agents::{AgentKind, AgentSpec};
use crate::diagnostics::SaddlePoint;
use crate::error::{Error, Result};
use crate::numerics::{spd_solve, SymmetricMatrix, Vector};
use crate::scalar::{cst, Scalar};

/// Solves the quadratic consensus problem directly:
/// `z* = -(sum Q_i)^{-1} sum b_i`, `x_i* = z*`, and
/// `lambda_i* = Q_i z* + b_i` (the gradient of each agent at the optimum).
/// The optimal prices sum to zero by construction; this is verified before
/// returning.
pub fn direct_solve<T: Scalar>(agents: &[AgentSpec<T>]) -> Result<SaddlePoint<T>> {
    if agents.is_empty() {
        return Err(Error::EmptyAgentList);
    }
    let n = agents[0].dim();
    let mut q_sum = SymmetricMatrix::scaled_identity(n, T::zero());
    let mut b_sum = Vector::zeros(n);
    for agent in agents {
        let q = agent
            .quadratic()
            .ok_or(Error::OracleUnavailable { what: "direct solve of a non-quadratic agent" })?;
        if q.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: q.dim() });
        }
        q_sum = q_sum.add(q.q())?;
        b_sum = b_sum.add(q.b());
    }
    let z_star = spd_solve(&q_sum, &b_sum.scaled(-T::one()))?;
    let lambda_star: Vec<Vector<T>> = agents
        .iter()
        .map(|a| a.quadratic().expect("checked above").gradient(&z_star))
        .collect::<Result<_>>()?;

    let mut sum = Vector::zeros(n);
    let mut max_norm = T::zero();
    for l in &lambda_star {
        sum = sum.add(l);
        max_norm = max_norm.max(l.norm());
    }
    let tol = cst::<T>(1e-9).max(T::epsilon() * cst::<T>(100.0));
    if sum.norm() > tol * (T::one() + max_norm) {
        return Err(Error::SelfCheck(format!(
            "optimal prices do not sum to zero: {:?}",
            sum.norm()
        )));
    }
    Ok(SaddlePoint { x_star: vec![z_star.clone(); agents.len()], z_star, lambda_star })
}

/// The per-agent subproblem in its unified form:
/// minimize `g(u) - lambda' u + rho~/2 ||z - u||^2 + D_phi(u, anchor)`,
/// with `rho~ = rho` for primal/proximal agents and `0` for dual agents,
/// and `phi` the agent's linearization potential (zero unless primal).
pub struct UnifiedSubproblem<'a, T> {
    q: &'a SymmetricMatrix<T>,
    b: &'a Vector<T>,
    pub lambda: &'a Vector<T>,
    pub z: &'a Vector<T>,
    pub rho_tilde: T,
    pub phi_hessian: Option<SymmetricMatrix<T>>,
    pub anchor: Vector<T>,
}

impl<'a, T: Scalar> UnifiedSubproblem<'a, T> {
    /// The subproblem the vanilla algorithm solves for this agent at state
    /// `(x, z, lambda)`.
    pub fn vanilla(
        agent: &'a AgentSpec<T>,
        x: &Vector<T>,
        z: &'a Vector<T>,
        lambda: &'a Vector<T>,
    ) -> Result<Self> {
        let quad = agent
            .quadratic()
            .ok_or(Error::OracleUnavailable { what: "brute force on a non-quadratic agent" })?;
        let n = quad.dim();
        let (rho_tilde, phi_hessian) = match agent.kind() {
            AgentKind::Primal => {
                let l = agent.majorant().expect("primal agents carry a majorant");
                let h = SymmetricMatrix::scaled_identity(n, l).sub(quad.q())?;
                (agent.rho(), Some(h))
            }
            AgentKind::Dual => (T::zero(), None),
            AgentKind::Proximal => (agent.rho(), None),
        };
        Ok(Self {
            q: quad.q(),
            b: quad.b(),
            lambda,
            z,
            rho_tilde,
            phi_hessian,
            anchor: x.clone(),
        })
    }

    /// Same subproblem with an explicit potential Hessian and anchor point
    /// (used to express the generalized and regularized variants).
    pub fn with_potential(
        agent: &'a AgentSpec<T>,
        anchor: Vector<T>,
        z: &'a Vector<T>,
        lambda: &'a Vector<T>,
        rho_tilde: T,
        phi_hessian: Option<SymmetricMatrix<T>>,
    ) -> Result<Self> {
        let quad = agent
            .quadratic()
            .ok_or(Error::OracleUnavailable { what: "brute force on a non-quadratic agent" })?;
        Ok(Self { q: quad.q(), b: quad.b(), lambda, z, rho_tilde, phi_hessian, anchor })
    }

    /// Gradient of the subproblem objective at `u`.
    pub fn gradient(&self, u: &Vector<T>) -> Result<Vector<T>> {
        let mut g = self.q.matvec(u)?.add(self.b).sub(self.lambda);
        if self.rho_tilde > T::zero() {
            g = g.add_scaled(self.rho_tilde, &u.sub(self.z));
        }
        if let Some(h) = &self.phi_hessian {
            g = g.add(&h.matvec(&u.sub(&self.anchor))?);
        }
        Ok(g)
    }
}

const GRADIENT_TOLERANCE: f64 = 1e-12;
const MAX_DESCENT_STEPS: usize = 500_000;

/// Minimizes a unified subproblem by steepest descent with exact line
/// search along each direction (directional curvature measured by a
/// finite difference of the gradient, never a matrix solve). Desk-scale
/// only: dimension at most 3.
pub fn brute_force_minimize<T: Scalar>(
    sub: &UnifiedSubproblem<'_, T>,
    start: &Vector<T>,
) -> Result<Vector<T>> {
    let n = start.len();
    if n > 3 {
        return Err(Error::InvalidConfig(
            "brute-force minimizer is restricted to dimension <= 3".into(),
        ));
    }
    let tol = cst::<T>(GRADIENT_TOLERANCE);
    let mut u = start.clone();
    for _ in 0..MAX_DESCENT_STEPS {
        let g = sub.gradient(&u)?;
        let gnorm = g.norm();
        if gnorm <= tol {
            return Ok(u);
        }
        // Directional curvature d' F'' d via a gradient finite difference.
        let h = cst::<T>(1e-3) * (T::one() + u.norm()) / gnorm;
        let g_ahead = sub.gradient(&u.add_scaled(-h, &g))?;
        let curvature = g.sub(&g_ahead).dot(&g) / h;
        if curvature <= T::zero() || !curvature.is_finite() {
            return Err(Error::NoConvergence {
                gradient_norm: gnorm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let step = g.norm_sq() / curvature;
        u = u.add_scaled(-step, &g);
    }
    let gnorm = sub.gradient(&u)?.norm();
    if gnorm <= tol {
        Ok(u)
    } else {
        Err(Error::NoConvergence { gradient_norm: gnorm.to_f64().unwrap_or(f64::NAN) })
    }
}

/// Numerically minimizes the agent's unified subproblem at `(x, z, lambda)`,
/// independently of the closed-form updates under test.
pub fn brute_force_unified_update<T: Scalar>(
    agent: &AgentSpec<T>,
    x: &Vector<T>,
    z: &Vector<T>,
    lambda: &Vector<T>,
) -> Result<Vector<T>> {
    let sub = UnifiedSubproblem::vanilla(agent, x, z, lambda)?;
    brute_force_minimize(&sub, x)
}
