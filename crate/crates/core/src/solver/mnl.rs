use log::debug;

use crate::choice::mnl_prob;
use crate::error::{Error, Result};
use crate::network::{load_flows, FlowState, Network, RouteSet};
use crate::scalar::Scalar;

use super::objective::Objective;
use super::{
    initial_flows, probabilities, scaled_distance, BoundState, EquilibriumSolution, ModelKind,
    SolverOptions, StepRule, TraceRow,
};

/// Beckmann plus the entropy term `(1/θ) Σ f (ln f - 1)`.
fn fisk<T: Scalar>(network: &Network<T>, state: &FlowState<T>, dispersion: T) -> Result<Objective<T>> {
    let beckmann = network.beckmann(&state.link_flows)?;
    let entropy: T = state
        .route_flows
        .iter()
        .map(|&f| if f > T::zero() { f * (f.ln() - T::one()) } else { T::zero() })
        .sum::<T>()
        / dispersion;
    Ok(Objective {
        total: beckmann + entropy,
        beckmann,
        route_term: entropy,
    })
}

fn logit_targets<T: Scalar>(route_set: &RouteSet<T>, route_times: &[T], dispersion: T) -> Result<Vec<T>> {
    let mut y = vec![T::zero(); route_times.len()];
    for (k, od) in route_set.ods().iter().enumerate() {
        let q = od.pair.demand;
        let range = route_set.range(k);
        if q > T::zero() {
            let p = mnl_prob(&route_times[range.clone()], dispersion)?;
            for (dst, &pi) in y[range].iter_mut().zip(p.probs()) {
                *dst = q * pi;
            }
        }
    }
    Ok(y)
}

/// Logit stochastic user equilibrium by successive averages.
///
/// With [`StepRule::Armijo`] the step backtracks on the Fisk objective.
pub fn solve_mnl_sue<T: Scalar>(
    network: &Network<T>,
    route_set: &RouteSet<T>,
    dispersion: T,
    options: &SolverOptions<T>,
) -> Result<EquilibriumSolution<T>> {
    options.validate()?;
    if !(dispersion > T::zero()) || !dispersion.is_finite() {
        return Err(Error::domain(format!("dispersion must be positive, got {dispersion}")));
    }
    let mut flows = initial_flows(network, route_set, options)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gap = T::infinity();

    for k in 1..=options.max_iterations {
        iterations = k;
        let state = load_flows(network, route_set, &flows)?;
        let targets = logit_targets(route_set, &state.route_times, dispersion)?;
        let z = fisk(network, &state, dispersion)?.total;
        gap = scaled_distance(route_set, &targets, &flows);
        trace.push(TraceRow {
            iteration: k,
            objective: z,
            residual: gap,
        });
        if gap <= options.flow_tolerance {
            converged = true;
            break;
        }
        let d: Vec<T> = targets.iter().zip(&flows).map(|(y, f)| *y - *f).collect();
        let alpha = match options.step {
            StepRule::Msa => T::one() / T::from_usize_lossy(k),
            StepRule::Armijo => {
                let slope: T = state
                    .route_times
                    .iter()
                    .zip(&flows)
                    .zip(&d)
                    .map(|((g, f), di)| (*g + f.ln() / dispersion) * *di)
                    .sum();
                let mut alpha = T::one();
                for _ in 0..60 {
                    let trial: Vec<T> = flows
                        .iter()
                        .zip(&d)
                        .map(|(f, di)| (*f + alpha * *di).max(T::zero()))
                        .collect();
                    let zt = fisk(network, &load_flows(network, route_set, &trial)?, dispersion)?.total;
                    // An infinite slope (zero flows) only asks for plain decrease.
                    let bound = if slope.is_finite() {
                        z + T::lit(1e-4) * alpha * slope
                    } else {
                        z
                    };
                    if zt <= bound {
                        break;
                    }
                    alpha = alpha * T::lit(0.5);
                }
                alpha
            }
        };
        for (f, di) in flows.iter_mut().zip(&d) {
            *f = (*f + alpha * *di).max(T::zero());
        }
    }

    let state = load_flows(network, route_set, &flows)?;
    let objective = fisk(network, &state, dispersion)?;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("not converged after {iterations} iterations (flow gap {gap})"));
    }
    debug!("MNL-SUE finished: {iterations} iterations, gap {gap}");
    Ok(EquilibriumSolution {
        model: ModelKind::MnlSue,
        probabilities: probabilities(route_set, &state.route_flows),
        flows: state,
        bounds: BoundState {
            per_od: vec![None; route_set.od_count()],
        },
        objective,
        kkt_residual: gap,
        iterations,
        converged,
        trace,
        warnings,
    })
}
