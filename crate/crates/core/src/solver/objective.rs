use crate::error::{Error, Result};
use crate::network::FlowState;
use crate::scalar::Scalar;

use super::eunit::EUnitSueSpec;

/// Objective value with its Beckmann part and the route-flow term.
///
/// For eUnit the second term is `-Σ b ln(f + 1)`; for MNL-SUE it is the
/// entropy term `(1/ϱ) Σ f (ln f - 1)`; DUE and BSUE leave it at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Objective<T> {
    pub total: T,
    pub beckmann: T,
    pub route_term: T,
}

fn check_nonnegative<T: Scalar>(flows: &[T]) -> Result<()> {
    match flows.iter().position(|f| !(*f >= T::zero())) {
        Some(i) => Err(Error::domain(format!("route {i} has negative flow {}", flows[i]))),
        None => Ok(()),
    }
}

/// `-Σ_od b_od Σ_r ln(f_r + 1)`.
pub(crate) fn log_term<T: Scalar>(spec: &EUnitSueSpec<'_, T>, flows: &[T]) -> T {
    let rs = spec.route_set();
    let mut total = T::zero();
    for (k, &b) in spec.bound_ranges().iter().enumerate() {
        let s: T = flows[rs.range(k)].iter().map(|f| f.ln_1p()).sum();
        total = total - b * s;
    }
    total
}

/// Evaluates `Z = Z1 + Z2` at the given flow state.
pub fn eunit_objective<T: Scalar>(state: &FlowState<T>, spec: &EUnitSueSpec<'_, T>) -> Result<Objective<T>> {
    if state.route_flows.len() != spec.route_set().route_count() {
        return Err(Error::structure("flow state does not match the route set"));
    }
    check_nonnegative(&state.route_flows)?;
    let beckmann = spec.network().beckmann(&state.link_flows)?;
    let route_term = log_term(spec, &state.route_flows);
    Ok(Objective {
        total: beckmann + route_term,
        beckmann,
        route_term,
    })
}

/// `∂Z/∂f_r = g_r - b / (f_r + 1)` for every route.
pub fn eunit_gradient<T: Scalar>(state: &FlowState<T>, spec: &EUnitSueSpec<'_, T>) -> Result<Vec<T>> {
    if state.route_flows.len() != spec.route_set().route_count() {
        return Err(Error::structure("flow state does not match the route set"));
    }
    check_nonnegative(&state.route_flows)?;
    let rs = spec.route_set();
    let mut grad = Vec::with_capacity(state.route_flows.len());
    for (k, &b) in spec.bound_ranges().iter().enumerate() {
        for i in rs.range(k) {
            grad.push(state.route_times[i] - b / (state.route_flows[i] + T::one()));
        }
    }
    Ok(grad)
}
