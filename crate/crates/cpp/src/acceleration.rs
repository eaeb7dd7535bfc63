//! Momentum wrapper with adaptive restart around the vanilla iteration.
//!
//! The consensus plan and the prices are extrapolated with the Nesterov
//! coefficient schedule `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`; the
//! inner round then runs from the extrapolated points. When the combined
//! residual grows (`c_k > eta * c_{k-1}`), momentum is restarted: `alpha`
//! resets to 1 and the extrapolated points collapse onto the current
//! iterate. One scheme serves all supported configurations (all-dual,
//! all-proximal, dual+proximal, all-primal); configurations mixing primal
//! agents with other kinds are rejected.

use crate::agents::{AgentKind, AgentSpec};
use crate::coordinator::{iterate, CoordinatorState, SolveConfig};
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scalar::{cst, Scalar};

/// Momentum bookkeeping: the coefficient, the extrapolated consensus plan
/// and prices, the combined residual of the last step, and the restart
/// counter.
#[derive(Clone, Debug)]
pub struct MomentumState<T> {
    pub alpha: T,
    pub z_hat: Vector<T>,
    pub lambda_hat: Vec<Vector<T>>,
    /// Combined residual at the last accepted step (`infinity` before the
    /// first step, so the first comparison never restarts).
    pub c: T,
    pub restarts: usize,
}

impl<T: Scalar> MomentumState<T> {
    /// Fresh momentum state anchored at `state`. Fails with
    /// [`Error::UnsupportedMix`] for configurations that mix primal agents
    /// with other kinds.
    pub fn new(state: &CoordinatorState<T>, agents: &[AgentSpec<T>]) -> Result<Self> {
        if !acceleration_supported(agents) {
            return Err(Error::UnsupportedMix);
        }
        Ok(Self {
            alpha: T::one(),
            z_hat: state.z.clone(),
            lambda_hat: state.lambda.clone(),
            c: T::infinity(),
            restarts: 0,
        })
    }
}

/// Acceleration covers single-interface configurations and dual+proximal
/// mixes; primal agents cannot (yet) be mixed with other kinds.
pub fn acceleration_supported<T: Scalar>(agents: &[AgentSpec<T>]) -> bool {
    let has_primal = agents.iter().any(|a| a.kind() == AgentKind::Primal);
    let has_other = agents.iter().any(|a| a.kind() != AgentKind::Primal);
    !(has_primal && has_other)
}

/// Restart rule: restart when the combined residual failed to decrease by
/// the factor `eta`.
pub fn restart_check<T: Scalar>(c_k: T, c_prev: T, eta: T) -> bool {
    c_k > eta * c_prev
}

/// One accelerated round: run the vanilla phases from the extrapolated
/// `(z_hat, lambda_hat)`, measure the combined residual, then either
/// extrapolate for the next round or restart.
pub fn accelerated_iterate<T: Scalar>(
    state: &CoordinatorState<T>,
    momentum: &MomentumState<T>,
    agents: &[AgentSpec<T>],
    config: &SolveConfig<T>,
) -> Result<(CoordinatorState<T>, MomentumState<T>)> {
    if !acceleration_supported(agents) {
        return Err(Error::UnsupportedMix);
    }
    let hatted = CoordinatorState {
        x: state.x.clone(),
        z: momentum.z_hat.clone(),
        lambda: momentum.lambda_hat.clone(),
        k: state.k,
    };
    let next = iterate(&hatted, agents, config)?;

    // Goldstein-style combined residual, with the mean rate standing in
    // when agents use different rho.
    let mean_rho = agents.iter().map(|a| a.rho()).fold(T::zero(), |a, b| a + b)
        / cst::<T>(agents.len() as f64);
    let lambda_gap: T = next
        .lambda
        .iter()
        .zip(&momentum.lambda_hat)
        .map(|(l, l_hat)| l.dist_sq(l_hat))
        .fold(T::zero(), |a, b| a + b);
    let c_k = lambda_gap / mean_rho + mean_rho * next.z.dist_sq(&momentum.z_hat);

    let mut out = momentum.clone();
    out.c = c_k;
    if restart_check(c_k, momentum.c, config.restart_eta) {
        out.alpha = T::one();
        out.z_hat = next.z.clone();
        out.lambda_hat = next.lambda.clone();
        out.restarts += 1;
    } else {
        let four = cst::<T>(4.0);
        let half = cst::<T>(0.5);
        let alpha_next = half * (T::one() + (T::one() + four * momentum.alpha * momentum.alpha).sqrt());
        let weight = config
            .momentum_weight_override
            .unwrap_or((momentum.alpha - T::one()) / alpha_next);
        out.alpha = alpha_next;
        out.z_hat = next.z.add_scaled(weight, &next.z.sub(&state.z));
        out.lambda_hat = next
            .lambda
            .iter()
            .zip(&state.lambda)
            .map(|(l_new, l_old)| l_new.add_scaled(weight, &l_new.sub(l_old)))
            .collect();
    }
    Ok((next, out))
}
