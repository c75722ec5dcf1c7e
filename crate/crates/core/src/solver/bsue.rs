use log::debug;

use crate::choice::bc_prob;
use crate::error::{Error, Result};
use crate::network::{load_flows, Network, RouteSet};
use crate::scalar::Scalar;

use super::objective::Objective;
use super::{
    argmin, initial_flows, probabilities, scaled_distance, BoundState, EquilibriumSolution,
    ModelKind, OdBound, SolverOptions, TraceRow,
};

const SNAP_ROUNDS: usize = 10;

fn same_support<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| (*x > T::zero()) == (*y > T::zero()))
}

/// Bounded-choice SUE as a fixed point `f = q · P_BC(g(f))`, iterated with
/// successive averages. The step rule option is ignored: there is no
/// objective to backtrack on.
pub fn solve_bsue_fixed_point<T: Scalar>(
    network: &Network<T>,
    route_set: &RouteSet<T>,
    scale: T,
    threshold: T,
    options: &SolverOptions<T>,
) -> Result<EquilibriumSolution<T>> {
    options.validate()?;
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::domain(format!("BC scale must be positive, got {scale}")));
    }
    if !(threshold >= T::zero()) || !threshold.is_finite() {
        return Err(Error::domain(format!("BC threshold must be non-negative, got {threshold}")));
    }
    let targets_at = |route_times: &[T]| -> Result<Vec<T>> {
        let mut y = vec![T::zero(); route_times.len()];
        for (k, od) in route_set.ods().iter().enumerate() {
            let q = od.pair.demand;
            let range = route_set.range(k);
            if q > T::zero() {
                let p = bc_prob(&route_times[range.clone()], scale, threshold)?;
                for (dst, &pi) in y[range].iter_mut().zip(p.probs()) {
                    *dst = q * pi;
                }
            }
        }
        Ok(y)
    };

    let mut flows = initial_flows(network, route_set, options)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gap = T::infinity();
    let mut snaps = 0;
    for k in 1..=options.max_iterations {
        iterations = k;
        let state = load_flows(network, route_set, &flows)?;
        let targets = targets_at(&state.route_times)?;
        gap = scaled_distance(route_set, &targets, &flows);
        trace.push(TraceRow {
            iteration: k,
            objective: network.beckmann(&state.link_flows)?,
            residual: gap,
        });
        // Cut routes only decay like 1/k under averaging; once close, adopt
        // the target pattern so they carry exactly zero.
        if gap <= options.flow_tolerance.sqrt() && snaps < SNAP_ROUNDS && !same_support(&targets, &flows) {
            snaps += 1;
            flows = targets;
            continue;
        }
        if gap <= options.flow_tolerance {
            converged = true;
            break;
        }
        let alpha = T::one() / T::from_usize_lossy(k);
        for (f, y) in flows.iter_mut().zip(&targets) {
            *f = (*f + alpha * (*y - *f)).max(T::zero());
        }
    }

    let state = load_flows(network, route_set, &flows)?;
    let bounds = BoundState {
        per_od: (0..route_set.od_count())
            .map(|k| {
                let range = route_set.range(k);
                (route_set.ods()[k].pair.demand > T::zero() && !range.is_empty()).then(|| {
                    let g = &state.route_times[range];
                    let m = g[argmin(g)];
                    OdBound {
                        lower: m,
                        upper: m + threshold,
                    }
                })
            })
            .collect(),
    };
    let beckmann = network.beckmann(&state.link_flows)?;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("not converged after {iterations} iterations (flow gap {gap})"));
    }
    debug!("BSUE finished: {iterations} iterations, gap {gap}");
    Ok(EquilibriumSolution {
        model: ModelKind::Bsue,
        probabilities: probabilities(route_set, &state.route_flows),
        flows: state,
        bounds,
        objective: Objective {
            total: beckmann,
            beckmann,
            route_term: T::zero(),
        },
        kkt_residual: gap,
        iterations,
        converged,
        trace,
        warnings,
    })
}
