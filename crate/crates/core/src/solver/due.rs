use log::debug;

use crate::error::Result;
use crate::network::{load_flows, Network, RouteSet};
use crate::scalar::Scalar;

use super::objective::Objective;
use super::{
    argmin, initial_flows, probabilities, BoundState, EquilibriumSolution, ModelKind, OdBound,
    SolverOptions, TraceRow,
};

/// `(Σ f g - Σ q min g) / Σ f g`; zero when nothing flows.
pub fn relative_gap<T: Scalar>(route_set: &RouteSet<T>, flows: &[T], route_times: &[T]) -> T {
    let mut total = T::zero();
    let mut shortest = T::zero();
    for (k, od) in route_set.ods().iter().enumerate() {
        let range = route_set.range(k);
        if range.is_empty() {
            continue;
        }
        let g = &route_times[range.clone()];
        total = total + flows[range].iter().zip(g).map(|(f, t)| *f * *t).sum::<T>();
        shortest = shortest + od.pair.demand * g[argmin(g)];
    }
    if total > T::zero() {
        ((total - shortest) / total).max(T::zero())
    } else {
        T::zero()
    }
}

fn path_time<T: Scalar>(ids: &[usize], link_times: &[T]) -> T {
    ids.iter().map(|&a| link_times[a - 1]).sum()
}

/// Deterministic user equilibrium by path-based gradient projection.
///
/// Each sweep shifts flow from every costlier used route to the current
/// shortest route of its OD with a Newton step on the time difference.
/// Stops when the relative gap is at most `options.kkt_tolerance`.
pub fn solve_due<T: Scalar>(
    network: &Network<T>,
    route_set: &RouteSet<T>,
    options: &SolverOptions<T>,
) -> Result<EquilibriumSolution<T>> {
    options.validate()?;
    let links = network.links();
    let mut flows = initial_flows(network, route_set, options)?;
    let state = load_flows(network, route_set, &flows)?;
    let mut v = state.link_flows;
    let mut t = state.link_times;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut gap = relative_gap(route_set, &flows, &route_set.route_times(&t));
    if gap <= options.kkt_tolerance {
        converged = true;
    }
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        for k in 0..route_set.od_count() {
            let routes = &route_set.ods()[k].routes;
            let base = route_set.range(k).start;
            if routes.len() < 2 {
                continue;
            }
            for r in 0..routes.len() {
                let times: Vec<T> = routes.iter().map(|p| path_time(p.link_ids(), &t)).collect();
                let s = argmin(&times);
                if r == s || flows[base + r] <= T::zero() {
                    continue;
                }
                let diff = times[r] - times[s];
                if diff <= T::zero() {
                    continue;
                }
                let (from, to) = (&routes[r], &routes[s]);
                let curvature: T = from
                    .link_ids()
                    .iter()
                    .filter(|a| !to.contains(**a))
                    .chain(to.link_ids().iter().filter(|a| !from.contains(**a)))
                    .map(|&a| links[a - 1].time_derivative(v[a - 1]))
                    .sum();
                let fr = flows[base + r];
                let delta = if curvature > T::zero() {
                    (diff / curvature).min(fr)
                } else {
                    fr
                };
                flows[base + r] = fr - delta;
                flows[base + s] = flows[base + s] + delta;
                for &a in from.link_ids().iter().filter(|a| !to.contains(**a)) {
                    v[a - 1] = (v[a - 1] - delta).max(T::zero());
                    t[a - 1] = links[a - 1].time_unchecked(v[a - 1]);
                }
                for &a in to.link_ids().iter().filter(|a| !from.contains(**a)) {
                    v[a - 1] = v[a - 1] + delta;
                    t[a - 1] = links[a - 1].time_unchecked(v[a - 1]);
                }
            }
        }
        // Re-aggregate to shed accumulated rounding in the incremental updates.
        let state = load_flows(network, route_set, &flows)?;
        v = state.link_flows;
        t = state.link_times;
        gap = relative_gap(route_set, &flows, &state.route_times);
        trace.push(TraceRow {
            iteration: iterations,
            objective: network.beckmann(&v)?,
            residual: gap,
        });
        if gap <= options.kkt_tolerance {
            converged = true;
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
                    OdBound { lower: m, upper: m }
                })
            })
            .collect(),
    };
    let beckmann = network.beckmann(&state.link_flows)?;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("not converged after {iterations} iterations (relative gap {gap})"));
    }
    debug!("DUE finished: {iterations} sweeps, relative gap {gap}");
    Ok(EquilibriumSolution {
        model: ModelKind::Due,
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
