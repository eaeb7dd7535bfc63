//! The coordinator: per-round agent updates, weighted consensus averaging,
//! price updates, stopping rules, and the second-order / regularized /
//! tighter-bound update variants.
//!
//! Each round runs three phases in strict order. Phase 1 updates every
//! agent's plan reading only values from round `k` (agents may be updated
//! concurrently); phase 2 averages the plans into the consensus plan; phase
//! 3 updates the prices. The sum of the prices stays zero at every round.

use rayon::prelude::*;

use crate::acceleration::{accelerated_iterate, MomentumState};
use crate::agents::{AgentKind, AgentSpec};
use crate::diagnostics::{lyapunov_v, relative_error, residual_norms, residual_r, SaddlePoint};
use crate::error::{Error, Result};
use crate::numerics::{spd_solve, SymmetricMatrix, Vector};
use crate::scalar::{cst, Scalar};
use crate::trace::{RunTrace, TraceRow};

/// The full mutable state of the algorithm: per-agent plans, the consensus
/// plan, per-agent prices, and the iteration counter.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatorState<T> {
    pub x: Vec<Vector<T>>,
    pub z: Vector<T>,
    pub lambda: Vec<Vector<T>>,
    pub k: usize,
}

impl<T: Scalar> CoordinatorState<T> {
    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn agent_count(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite()
            && self.x.iter().all(Vector::is_finite)
            && self.lambda.iter().all(Vector::is_finite)
    }

    /// Componentwise sum of all prices; zero (up to rounding) at every round.
    pub fn price_sum(&self) -> Vector<T> {
        let mut sum = Vector::zeros(self.dim());
        for l in &self.lambda {
            sum = sum.add(l);
        }
        sum
    }

    fn debug_check_price_sum(&self) {
        #[cfg(debug_assertions)]
        {
            // Divergent states are reported as NonFinite by the solve loop.
            if !self.is_finite() {
                return;
            }
            let max_norm = self
                .lambda
                .iter()
                .map(Vector::norm)
                .fold(T::zero(), T::max);
            let tol = cst::<T>(1e-9).max(T::epsilon() * cst::<T>(100.0)) * (T::one() + max_norm);
            debug_assert!(
                self.price_sum().norm() <= tol,
                "price sum invariant violated at k = {}",
                self.k
            );
        }
    }
}

/// Flags selecting the update variants for a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VariantFlags {
    /// Newton price updates for dual agents, with the matching weighted
    /// consensus update.
    pub second_order_dual: bool,
    /// Two-step regularized updates for dual agents.
    pub regularized_dual: bool,
    /// Generalized primal steps using each agent's tighter quadratic bound
    /// (the objective's own Hessian when no explicit bound is attached).
    pub tighter_bounds: bool,
}

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct SolveConfig<T> {
    pub max_iters: usize,
    pub primal_tol: T,
    pub dual_tol: T,
    pub acceleration: bool,
    /// Restart threshold: restart when `c_k > eta * c_{k-1}`.
    pub restart_eta: T,
    /// Diagnostic knob: fixes the extrapolation weight instead of the
    /// Nesterov schedule (0 reproduces the vanilla iteration exactly).
    pub momentum_weight_override: Option<T>,
    pub variants: VariantFlags,
    /// Fan phase-1 agent updates out to rayon workers. Results are reduced
    /// in agent-index order either way, so traces do not depend on this.
    pub parallel: bool,
}

impl<T: Scalar> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            primal_tol: cst(1e-8),
            dual_tol: cst(1e-8),
            acceleration: false,
            restart_eta: cst(0.999),
            momentum_weight_override: None,
            variants: VariantFlags::default(),
            parallel: false,
        }
    }
}

impl<T: Scalar> SolveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.primal_tol <= T::zero() || self.dual_tol <= T::zero() {
            return Err(Error::InvalidConfig("tolerances must be > 0".into()));
        }
        if self.restart_eta <= T::zero() {
            return Err(Error::InvalidConfig("restart_eta must be > 0".into()));
        }
        if self.variants.second_order_dual && self.variants.regularized_dual {
            return Err(Error::InvalidConfig(
                "second_order_dual and regularized_dual are mutually exclusive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a solve: final state, convergence flag, iterations used, and
/// the per-iteration trace.
#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub state: CoordinatorState<T>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: RunTrace<T>,
}

/// Zero-initializes the state: `x_i = z = 0` and `lambda_i = 0`, which
/// satisfies the required zero-sum price initialization.
pub fn initialize<T: Scalar>(agents: &[AgentSpec<T>], n: usize) -> Result<CoordinatorState<T>> {
    if agents.is_empty() {
        return Err(Error::EmptyAgentList);
    }
    if n == 0 {
        return Err(Error::InvalidConfig("plan dimension must be >= 1".into()));
    }
    for agent in agents {
        if agent.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: agent.dim() });
        }
    }
    Ok(CoordinatorState {
        x: vec![Vector::zeros(n); agents.len()],
        z: Vector::zeros(n),
        lambda: vec![Vector::zeros(n); agents.len()],
        k: 0,
    })
}

/// Linearized (Bregman) step for a primal agent:
/// `x+ = (L x + rho z)/(L + rho) - (grad g(x) - lambda)/(L + rho)`,
/// the minimizer of the quadratic upper bound of the augmented subproblem.
pub fn primal_agent_step<T: Scalar>(
    agent: &AgentSpec<T>,
    x: &Vector<T>,
    z: &Vector<T>,
    lambda: &Vector<T>,
) -> Result<Vector<T>> {
    let (_, grad) = agent.primal_oracle(x)?;
    let l = agent.majorant().expect("primal agents carry a majorant");
    let rho = agent.rho();
    let denom = l + rho;
    let blend = x.scaled(l).add(&z.scaled(rho)).scaled(denom.recip());
    Ok(blend.add(&grad.sub(lambda).scaled(-denom.recip())))
}

/// Generalized primal step with a non-spherical quadratic bound `H >= Q`:
/// `x+ = (H + rho I)^{-1} (H x - grad g(x) + rho z + lambda)`.
/// Reduces to [`primal_agent_step`] when `H = L I`, and to the proximal
/// update when `H = Q` (the default when no explicit bound is attached).
pub fn generalized_primal_step<T: Scalar>(
    agent: &AgentSpec<T>,
    x: &Vector<T>,
    z: &Vector<T>,
    lambda: &Vector<T>,
) -> Result<Vector<T>> {
    let (_, grad) = agent.primal_oracle(x)?;
    let rho = agent.rho();
    match agent.tight_bound() {
        Some(h) => {
            let rhs = h.matvec(x)?.sub(&grad).add(&z.scaled(rho)).add(lambda);
            agent
                .tight_bound_solver()
                .expect("tight bound always carries its solver")
                .solve(&rhs)
        }
        None => {
            let q = agent
                .quadratic()
                .ok_or(Error::OracleUnavailable { what: "tight quadratic bound" })?;
            let rhs = q.q().matvec(x)?.sub(&grad).add(&z.scaled(rho)).add(lambda);
            q.solve_shifted(rho, &rhs)
        }
    }
}

/// Two-step regularized update for a dual agent: solve the dual subproblem,
/// then pull the plan towards the consensus,
/// `x+ = (L x~ + rho z)/(L + rho)`.
pub fn regularized_dual_step<T: Scalar>(
    agent: &AgentSpec<T>,
    z: &Vector<T>,
    lambda: &Vector<T>,
) -> Result<Vector<T>> {
    let x_tilde = agent.dual_oracle(lambda)?;
    let l = agent.regularization().unwrap_or_else(|| agent.beta());
    let rho = agent.rho();
    Ok(x_tilde.scaled(l).add(&z.scaled(rho)).scaled((l + rho).recip()))
}

/// Consensus update: the rho-weighted average of the agents' plans,
/// `z+ = sum_i rho_i x_i / sum_i rho_i`. The reduction runs in fixed
/// agent-index order so results are independent of any phase-1 parallelism.
pub fn consensus_step<T: Scalar>(
    agents: &[AgentSpec<T>],
    x_new: &[Vector<T>],
) -> Result<Vector<T>> {
    if agents.len() != x_new.len() {
        return Err(Error::DimensionMismatch { expected: agents.len(), got: x_new.len() });
    }
    if agents.is_empty() {
        return Err(Error::EmptyAgentList);
    }
    let n = x_new[0].len();
    let mut sum = Vector::zeros(n);
    let mut weight = T::zero();
    for (agent, x) in agents.iter().zip(x_new) {
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        sum = sum.add_scaled(agent.rho(), x);
        weight = weight + agent.rho();
    }
    Ok(sum.scaled(weight.recip()))
}

/// Price update: `lambda+ = lambda + rho (z+ - x+)`.
pub fn price_step<T: Scalar>(
    agent: &AgentSpec<T>,
    lambda: &Vector<T>,
    z_new: &Vector<T>,
    x_new: &Vector<T>,
) -> Result<Vector<T>> {
    if z_new.len() != lambda.len() || x_new.len() != lambda.len() {
        return Err(Error::DimensionMismatch { expected: lambda.len(), got: z_new.len() });
    }
    Ok(lambda.add_scaled(agent.rho(), &z_new.sub(x_new)))
}

/// Newton price update for a dual agent:
/// `lambda+ = lambda + rho (hess g(x+) + eps I)(z+ - x+)`.
pub fn second_order_price_step<T: Scalar>(
    agent: &AgentSpec<T>,
    lambda: &Vector<T>,
    z_new: &Vector<T>,
    x_new: &Vector<T>,
) -> Result<Vector<T>> {
    if agent.kind() != AgentKind::Dual {
        return Err(Error::WrongKind {
            operation: "second_order_price_step",
            required: "dual",
            actual: agent.kind().name(),
        });
    }
    let eps = agent
        .newton_epsilon()
        .unwrap_or_else(|| cst::<T>(1e-6) * agent.beta());
    let hess = agent.hessian_at(x_new)?.add_scaled_identity(eps);
    let step = hess.matvec(&z_new.sub(x_new))?;
    Ok(lambda.add_scaled(agent.rho(), &step))
}

/// Consensus update matching the Newton price updates:
/// `z+ = (sum_i H_i)^{-1} sum_i H_i x_i`, with `H_i = rho_i I` for
/// primal/proximal agents and `H_i = rho_i (hess g_i(x_i+) + eps_i I)` for
/// dual agents. Reduces to [`consensus_step`] when every Hessian is the
/// identity and `eps = 0`.
pub fn weighted_consensus_step<T: Scalar>(
    agents: &[AgentSpec<T>],
    x_new: &[Vector<T>],
) -> Result<Vector<T>> {
    if agents.len() != x_new.len() {
        return Err(Error::DimensionMismatch { expected: agents.len(), got: x_new.len() });
    }
    if agents.is_empty() {
        return Err(Error::EmptyAgentList);
    }
    let n = x_new[0].len();
    let mut total = SymmetricMatrix::scaled_identity(n, T::zero());
    let mut rhs = Vector::zeros(n);
    for (agent, x) in agents.iter().zip(x_new) {
        let h = match agent.kind() {
            AgentKind::Dual => {
                let eps = agent
                    .newton_epsilon()
                    .unwrap_or_else(|| cst::<T>(1e-6) * agent.beta());
                agent.hessian_at(x)?.add_scaled_identity(eps).scaled(agent.rho())
            }
            _ => SymmetricMatrix::scaled_identity(n, agent.rho()),
        };
        rhs = rhs.add(&h.matvec(x)?);
        total = total.add(&h)?;
    }
    spd_solve(&total, &rhs)
}

pub(crate) fn update_agent<T: Scalar>(
    agent: &AgentSpec<T>,
    x: &Vector<T>,
    z: &Vector<T>,
    lambda: &Vector<T>,
    variants: &VariantFlags,
) -> Result<Vector<T>> {
    match agent.kind() {
        AgentKind::Primal => {
            if variants.tighter_bounds {
                generalized_primal_step(agent, x, z, lambda)
            } else {
                primal_agent_step(agent, x, z, lambda)
            }
        }
        AgentKind::Dual => {
            if variants.regularized_dual {
                regularized_dual_step(agent, z, lambda)
            } else {
                agent.dual_oracle(lambda)
            }
        }
        AgentKind::Proximal => agent.proximal_oracle(lambda, z, agent.rho()),
    }
}

/// One full round: agent updates (phase 1), consensus update (phase 2),
/// price updates (phase 3). Phase 1 reads only round-`k` values.
pub fn iterate<T: Scalar>(
    state: &CoordinatorState<T>,
    agents: &[AgentSpec<T>],
    config: &SolveConfig<T>,
) -> Result<CoordinatorState<T>> {
    if agents.len() != state.agent_count() {
        return Err(Error::DimensionMismatch {
            expected: state.agent_count(),
            got: agents.len(),
        });
    }
    // Phase 1: all agent updates, optionally fanned out. Either path yields
    // the plans in agent-index order.
    let x_new: Vec<Vector<T>> = if config.parallel && agents.len() > 1 {
        agents
            .par_iter()
            .enumerate()
            .map(|(i, a)| update_agent(a, &state.x[i], &state.z, &state.lambda[i], &config.variants))
            .collect::<Result<_>>()?
    } else {
        agents
            .iter()
            .enumerate()
            .map(|(i, a)| update_agent(a, &state.x[i], &state.z, &state.lambda[i], &config.variants))
            .collect::<Result<_>>()?
    };

    // Phase 2: consensus.
    let uses_newton_prices =
        config.variants.second_order_dual && agents.iter().any(|a| a.kind() == AgentKind::Dual);
    let z_new = if uses_newton_prices {
        weighted_consensus_step(agents, &x_new)?
    } else {
        consensus_step(agents, &x_new)?
    };

    // Phase 3: prices.
    let lambda_new: Vec<Vector<T>> = agents
        .iter()
        .zip(&x_new)
        .zip(&state.lambda)
        .map(|((agent, x), lambda)| {
            if uses_newton_prices && agent.kind() == AgentKind::Dual {
                second_order_price_step(agent, lambda, &z_new, x)
            } else {
                price_step(agent, lambda, &z_new, x)
            }
        })
        .collect::<Result<_>>()?;

    let next = CoordinatorState { x: x_new, z: z_new, lambda: lambda_new, k: state.k + 1 };
    next.debug_check_price_sum();
    Ok(next)
}

/// Runs the algorithm until both residual norms drop below the configured
/// tolerances or `max_iters` is reached.
pub fn solve<T: Scalar>(agents: &[AgentSpec<T>], config: &SolveConfig<T>) -> Result<RunResult<T>> {
    solve_observed(agents, config, None, &mut |_| Ok(()))
}

/// Like [`solve`], with a reference saddle point enriching the trace with
/// relative error and (on vanilla runs over quadratic agents) the
/// certificate quantities `V^k` and `r^k`.
pub fn solve_diagnosed<T: Scalar>(
    agents: &[AgentSpec<T>],
    config: &SolveConfig<T>,
    reference: &SaddlePoint<T>,
) -> Result<RunResult<T>> {
    solve_observed(agents, config, Some(reference), &mut |_| Ok(()))
}

/// Full-control solve: optional reference saddle point, plus an observer
/// invoked on the initial state and on every accepted iterate (used to
/// stream states into the certificate checker without retaining them).
pub fn solve_observed<T: Scalar>(
    agents: &[AgentSpec<T>],
    config: &SolveConfig<T>,
    reference: Option<&SaddlePoint<T>>,
    observer: &mut dyn FnMut(&CoordinatorState<T>) -> Result<()>,
) -> Result<RunResult<T>> {
    config.validate()?;
    if agents.is_empty() {
        return Err(Error::EmptyAgentList);
    }
    let n = agents[0].dim();
    let mut state = initialize(agents, n)?;
    let mut momentum = if config.acceleration {
        Some(MomentumState::new(&state, agents)?)
    } else {
        None
    };
    let all_quadratic = agents.iter().all(|a| a.quadratic().is_some());
    observer(&state)?;

    let mut rows = Vec::new();
    let mut converged = false;
    while state.k < config.max_iters {
        let restarts_before = momentum.as_ref().map_or(0, |m| m.restarts);
        let next = match momentum.as_mut() {
            Some(m) => {
                let (next, m_next) = accelerated_iterate(&state, m, agents, config)?;
                *m = m_next;
                next
            }
            None => iterate(&state, agents, config)?,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite { iteration: next.k });
        }
        let restarted = momentum.as_ref().is_some_and(|m| m.restarts > restarts_before);

        let (primal_res, dual_res) = residual_norms(&next, &state.z, agents);
        let objective = total_objective(agents, &next.z)?;
        let rel_error = match reference {
            Some(saddle) => Some(relative_error(&next.z, agents, saddle)?),
            None => None,
        };
        let (lyapunov, residual) = match reference {
            Some(saddle) if !config.acceleration && all_quadratic => (
                Some(lyapunov_v(&next, saddle, agents, &config.variants)?),
                Some(residual_r(&next, &state, agents, &config.variants)?),
            ),
            _ => (None, None),
        };
        rows.push(TraceRow {
            k: next.k,
            objective,
            rel_error,
            primal_res,
            dual_res,
            lyapunov,
            residual,
            restart: restarted,
        });
        observer(&next)?;
        state = next;
        if primal_res <= config.primal_tol && dual_res <= config.dual_tol {
            converged = true;
            break;
        }
    }
    Ok(RunResult { iterations: state.k, state, converged, trace: RunTrace { rows } })
}

/// `f(z) = sum_i g_i(z)`: the consensus objective at a common plan.
pub fn total_objective<T: Scalar>(agents: &[AgentSpec<T>], z: &Vector<T>) -> Result<T> {
    let mut total = T::zero();
    for agent in agents {
        total = total + agent.objective_value(z)?;
    }
    Ok(total)
}

/// Default learning rate per agent kind: the geometric mean
/// `sqrt(mu beta)` for primal and proximal agents, and `mu` (the dual-ascent
/// optimum) for dual agents.
pub fn default_rho<T: Scalar>(mu: T, beta: T, kind: AgentKind) -> Result<T> {
    if mu <= T::zero() || beta < mu {
        return Err(Error::InvalidCurvature {
            mu: mu.to_f64().unwrap_or(f64::NAN),
            beta: beta.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(match kind {
        AgentKind::Primal | AgentKind::Proximal => (mu * beta).sqrt(),
        AgentKind::Dual => mu,
    })
}
