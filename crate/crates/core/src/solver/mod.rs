//! Equilibrium solvers.
//!
//! The eUnit-SUE solver minimizes the convex program
//! `Z(f) = Σ_a ∫_0^{v_a} t_a - Σ_od b_od Σ_r ln(f_r + 1)` over the demand
//! simplex of every OD pair. Each iteration solves the partially linearized
//! subproblem (Beckmann term frozen at the current times) exactly: its
//! solution is the eUnit flow pattern `f_r = (u - g_r)+ / (g_r - l)`, with
//! the lower bound `l` picked by a bracketed root search so that the flows
//! add up to the demand. The iterate then moves toward that target with an
//! MSA or Armijo step.
//!
//! DUE, MNL-SUE and BSUE solvers are provided as baselines.

mod bsue;
mod due;
mod eunit;
mod inner;
mod mnl;
mod objective;

pub use bsue::solve_bsue_fixed_point;
pub use due::{relative_gap, solve_due};
pub use eunit::{kkt_residual, solve_eunit_sue, EUnitSueSpec};
pub use inner::{eunit_route_flows_from_bound, solve_inner_lower_bound};
pub use mnl::solve_mnl_sue;
pub use objective::{eunit_gradient, eunit_objective, Objective};

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{load_flows, FlowState, Network, RouteSet};
use crate::scalar::Scalar;

/// Step-size rule for the averaging iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Method of successive averages, step `1/k`.
    #[default]
    Msa,
    /// Backtracking from a unit step, halving until sufficient decrease of the
    /// objective (coefficient `1e-4`).
    Armijo,
}

impl std::str::FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msa" => Ok(StepRule::Msa),
            "armijo" => Ok(StepRule::Armijo),
            other => Err(Error::scenario("step", format!("unknown step rule `{other}` (msa | armijo)"))),
        }
    }
}

impl std::fmt::Display for StepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepRule::Msa => "msa",
            StepRule::Armijo => "armijo",
        })
    }
}

/// Starting point for route flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Demand split evenly across each OD's routes.
    #[default]
    Uniform,
    /// Demand on the free-flow shortest route (lowest index on ties).
    AllOrNothing,
    /// A random point of each OD's demand simplex, drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    pub max_iterations: usize,
    /// Stop when the largest route-flow distance to the iteration target,
    /// relative to `max(1, q)`, falls below this.
    pub flow_tolerance: T,
    /// Stop when the convergence certificate falls below this (KKT residual
    /// for eUnit, relative gap for DUE).
    pub kkt_tolerance: T,
    /// Demand-residual tolerance of the inner lower-bound search.
    pub inner_tolerance: T,
    pub step: StepRule,
    pub init: InitMode,
    pub seed: u64,
    /// Threads for the per-OD inner phase. Results do not depend on it.
    pub workers: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 20_000,
            flow_tolerance: T::lit(1e-10),
            kkt_tolerance: T::lit(1e-9),
            inner_tolerance: T::lit(1e-12),
            step: StepRule::Msa,
            init: InitMode::Uniform,
            seed: 0,
            workers: 1,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::scenario("max_iterations", "must be at least 1"));
        }
        for (name, v) in [
            ("flow_tolerance", self.flow_tolerance),
            ("kkt_tolerance", self.kkt_tolerance),
            ("inner_tolerance", self.inner_tolerance),
        ] {
            if !(v > T::zero()) {
                return Err(Error::scenario(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which model produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    EUnit,
    Due,
    MnlSue,
    Bsue,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::EUnit => "eunit",
            ModelKind::Due => "due",
            ModelKind::MnlSue => "mnl-sue",
            ModelKind::Bsue => "bsue",
        }
    }
}

/// Perceived-time bounds of one OD pair.
///
/// For eUnit these are `(l, u = l + b)`. BSUE reports `(min g, min g + ρ)`
/// and DUE the degenerate `(min g, min g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdBound<T> {
    pub lower: T,
    pub upper: T,
}

/// Per-OD bounds; `None` for OD pairs without demand or for models without bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState<T> {
    pub per_od: Vec<Option<OdBound<T>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub objective: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution<T> {
    pub model: ModelKind,
    pub flows: FlowState<T>,
    pub bounds: BoundState<T>,
    pub objective: Objective<T>,
    /// Convergence certificate: normalized KKT residual (eUnit), relative gap
    /// (DUE) or normalized fixed-point gap (MNL-SUE, BSUE).
    pub kkt_residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow<T>>,
    /// Route choice probabilities `f_r / q`.
    pub probabilities: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> EquilibriumSolution<T> {
    pub fn route_flows(&self) -> &[T] {
        &self.flows.route_flows
    }

    pub fn link_flows(&self) -> &[T] {
        &self.flows.link_flows
    }
}

pub(crate) fn probabilities<T: Scalar>(route_set: &RouteSet<T>, flows: &[T]) -> Vec<T> {
    let mut p = vec![T::zero(); flows.len()];
    for (k, od) in route_set.ods().iter().enumerate() {
        let q = od.pair.demand;
        if q > T::zero() {
            for i in route_set.range(k) {
                p[i] = flows[i] / q;
            }
        }
    }
    p
}

pub(crate) fn argmin<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Initial route flows according to `options.init`.
pub(crate) fn initial_flows<T: Scalar>(
    network: &Network<T>,
    route_set: &RouteSet<T>,
    options: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let mut f = vec![T::zero(); route_set.route_count()];
    match options.init {
        InitMode::Uniform => {
            for (k, od) in route_set.ods().iter().enumerate() {
                let range = route_set.range(k);
                if range.is_empty() {
                    continue;
                }
                let share = od.pair.demand / T::from_usize_lossy(range.len());
                f[range].iter_mut().for_each(|x| *x = share);
            }
        }
        InitMode::AllOrNothing => {
            let free = load_flows(network, route_set, &f)?;
            for (k, od) in route_set.ods().iter().enumerate() {
                let range = route_set.range(k);
                if range.is_empty() {
                    continue;
                }
                let best = argmin(&free.route_times[range.clone()]);
                f[range.start + best] = od.pair.demand;
            }
        }
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            for (k, od) in route_set.ods().iter().enumerate() {
                let range = route_set.range(k);
                if range.is_empty() {
                    continue;
                }
                // Normalized exponential spacings are uniform on the simplex.
                let draws: Vec<f64> = range
                    .clone()
                    .map(|_| -Distribution::<f64>::sample(&Open01, &mut rng).ln())
                    .collect::<Vec<f64>>();
                let total: f64 = draws.iter().sum();
                for (x, d) in f[range].iter_mut().zip(draws) {
                    *x = od.pair.demand * T::lit(d / total);
                }
            }
        }
    }
    Ok(f)
}

/// Largest `|a_r - b_r| / max(1, q_od)` over all routes.
pub(crate) fn scaled_distance<T: Scalar>(route_set: &RouteSet<T>, a: &[T], b: &[T]) -> T {
    let mut worst = T::zero();
    for (k, od) in route_set.ods().iter().enumerate() {
        let scale = od.pair.demand.max(T::one());
        for i in route_set.range(k) {
            worst = worst.max((a[i] - b[i]).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rule_parses() {
        assert_eq!("MSA".parse::<StepRule>().unwrap(), StepRule::Msa);
        assert_eq!("armijo".parse::<StepRule>().unwrap(), StepRule::Armijo);
        assert!("newton".parse::<StepRule>().is_err());
    }

    #[test]
    fn options_validate() {
        let mut o = SolverOptions::<f64>::default();
        assert!(o.validate().is_ok());
        o.kkt_tolerance = 0.0;
        assert!(o.validate().is_err());
        o = SolverOptions { max_iterations: 0, ..Default::default() };
        assert!(o.validate().is_err());
    }
}
