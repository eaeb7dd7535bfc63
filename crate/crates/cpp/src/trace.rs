//! Per-iteration diagnostic records produced by a solve.

/// One trace row per iteration. `rel_error`, `lyapunov`, and `residual` are
/// present only when a reference saddle point was supplied (and, for the
/// latter two, only on vanilla runs — the convergence certificates do not
/// apply to accelerated trajectories).
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub k: usize,
    /// Objective `f(z^k)` of the consensus plan.
    pub objective: T,
    /// `(f(z^k) - f(z*)) / |f(z*)|`.
    pub rel_error: Option<T>,
    pub primal_res: T,
    pub dual_res: T,
    /// Lyapunov value `V^k`.
    pub lyapunov: Option<T>,
    /// Progress residual `r^k`.
    pub residual: Option<T>,
    /// Whether the momentum wrapper restarted on this iteration.
    pub restart: bool,
}

/// The full per-run trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace<T> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: PartialOrd + Copy> RunTrace<T> {
    /// First iteration whose relative error is at or below `threshold`.
    pub fn first_k_with_rel_error_below(&self, threshold: T) -> Option<usize> {
        self.rows
            .iter()
            .find(|row| row.rel_error.is_some_and(|e| e <= threshold))
            .map(|row| row.k)
    }
}
