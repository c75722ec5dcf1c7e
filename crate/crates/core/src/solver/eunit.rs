use log::{debug, warn};

use crate::error::{Error, Result};
use crate::network::{load_flows, FlowState, Network, RouteSet};
use crate::scalar::Scalar;

use super::inner::{eunit_route_flows_from_bound, solve_inner_lower_bound};
use super::objective::{eunit_gradient, eunit_objective};
use super::{
    initial_flows, probabilities, scaled_distance, solve_due, BoundState, EquilibriumSolution,
    ModelKind, OdBound, SolverOptions, StepRule, TraceRow,
};

const ARMIJO_DECREASE: f64 = 1e-4;
const ARMIJO_MAX_HALVINGS: usize = 60;
const POLISH_ROUNDS: usize = 10;

/// An eUnit-SUE instance: network, routes (with demands), per-OD bound
/// ranges and solver options.
#[derive(Debug, Clone)]
pub struct EUnitSueSpec<'a, T> {
    network: &'a Network<T>,
    route_set: &'a RouteSet<T>,
    bound_ranges: Vec<T>,
    options: SolverOptions<T>,
}

impl<'a, T: Scalar> EUnitSueSpec<'a, T> {
    /// `bound_ranges[k]` is `b = u - l` of OD `k`. Either every range is
    /// positive, or every range is zero (the deterministic limit).
    pub fn new(
        network: &'a Network<T>,
        route_set: &'a RouteSet<T>,
        bound_ranges: Vec<T>,
        options: SolverOptions<T>,
    ) -> Result<Self> {
        if bound_ranges.len() != route_set.od_count() {
            return Err(Error::structure(format!(
                "{} bound ranges for {} OD pairs",
                bound_ranges.len(),
                route_set.od_count()
            )));
        }
        if let Some(b) = bound_ranges.iter().find(|b| !(**b >= T::zero()) || !b.is_finite()) {
            return Err(Error::domain(format!("bound range must be non-negative, got {b}")));
        }
        let zeros = bound_ranges.iter().filter(|b| **b == T::zero()).count();
        if zeros != 0 && zeros != bound_ranges.len() {
            return Err(Error::domain(
                "bound ranges must be all positive or all zero (zero means deterministic equilibrium)",
            ));
        }
        if let Some((_, r)) = route_set
            .iter()
            .find(|(_, r)| r.link_ids().iter().any(|&a| network.link(a).is_none()))
        {
            return Err(Error::structure(format!(
                "route {:?} references links outside the network",
                r.link_ids()
            )));
        }
        options.validate()?;
        Ok(EUnitSueSpec {
            network,
            route_set,
            bound_ranges,
            options,
        })
    }

    /// Same bound range for every OD pair.
    pub fn uniform(
        network: &'a Network<T>,
        route_set: &'a RouteSet<T>,
        bound_range: T,
        options: SolverOptions<T>,
    ) -> Result<Self> {
        Self::new(
            network,
            route_set,
            vec![bound_range; route_set.od_count()],
            options,
        )
    }

    pub fn network(&self) -> &'a Network<T> {
        self.network
    }

    pub fn route_set(&self) -> &'a RouteSet<T> {
        self.route_set
    }

    pub fn bound_ranges(&self) -> &[T] {
        &self.bound_ranges
    }

    pub fn options(&self) -> &SolverOptions<T> {
        &self.options
    }

    pub fn with_options(mut self, options: SolverOptions<T>) -> Result<Self> {
        options.validate()?;
        self.options = options;
        Ok(self)
    }

    /// True when every bound range is zero.
    pub fn is_deterministic(&self) -> bool {
        self.bound_ranges.iter().all(|b| *b == T::zero())
    }
}

/// Inner solve for one OD: bound and demand-scaled target flows.
fn inner_od<T: Scalar>(times: &[T], b: T, demand: T, tolerance: T) -> Result<(OdBound<T>, Vec<T>)> {
    let lower = solve_inner_lower_bound(times, b, demand, tolerance)?;
    let mut flows = eunit_route_flows_from_bound(times, lower, b)?;
    let total: T = flows.iter().copied().sum();
    let scale = demand / total;
    flows.iter_mut().for_each(|f| *f = *f * scale);
    Ok((
        OdBound {
            lower,
            upper: lower + b,
        },
        flows,
    ))
}

type OdInner<T> = Option<(OdBound<T>, Vec<T>)>;

fn inner_range<T: Scalar>(spec: &EUnitSueSpec<'_, T>, route_times: &[T], ods: std::ops::Range<usize>) -> Result<Vec<OdInner<T>>> {
    let rs = spec.route_set;
    ods.map(|k| {
        let q = rs.ods()[k].pair.demand;
        if q > T::zero() {
            inner_od(
                &route_times[rs.range(k)],
                spec.bound_ranges[k],
                q,
                spec.options.inner_tolerance,
            )
            .map(Some)
        } else {
            Ok(None)
        }
    })
    .collect()
}

/// Per-OD bounds and target flows at the given route times.
pub(crate) fn inner_phase<T: Scalar>(spec: &EUnitSueSpec<'_, T>, route_times: &[T]) -> Result<(Vec<T>, BoundState<T>)> {
    let n_od = spec.route_set.od_count();
    let workers = spec.options.workers.clamp(1, n_od.max(1));
    let per_od: Vec<OdInner<T>> = if workers == 1 {
        inner_range(spec, route_times, 0..n_od)?
    } else {
        let block = n_od.div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = (w * block).min(n_od)..((w + 1) * block).min(n_od);
                    s.spawn(move || inner_range(spec, route_times, range))
                })
                .collect();
            let mut out = Vec::with_capacity(n_od);
            for h in handles {
                out.extend(h.join().expect("inner-phase worker panicked")?);
            }
            Ok::<_, Error>(out)
        })?
    };
    let mut targets = vec![T::zero(); spec.route_set.route_count()];
    let mut bounds = Vec::with_capacity(n_od);
    for (k, entry) in per_od.into_iter().enumerate() {
        match entry {
            Some((bound, flows)) => {
                targets[spec.route_set.range(k)].copy_from_slice(&flows);
                bounds.push(Some(bound));
            }
            None => bounds.push(None),
        }
    }
    Ok((targets, BoundState { per_od: bounds }))
}

/// Normalized KKT violation of a flow state against per-OD lower bounds.
///
/// Per route: complementarity `|f (g - b/(f+1) - l)|` when `f > 0`,
/// stationarity `(l + b - g)+` when `f = 0`. Used-route terms are divided by
/// `q · b` and unused-route terms by `b`, so the residual measures time
/// errors against the bound range rather than against absolute travel times,
/// which can be orders of magnitude larger on congested networks. Returns
/// the maximum over all routes.
pub fn kkt_residual<T: Scalar>(state: &FlowState<T>, bounds: &BoundState<T>, spec: &EUnitSueSpec<'_, T>) -> T {
    let rs = spec.route_set;
    let mut worst = T::zero();
    for (k, od) in rs.ods().iter().enumerate() {
        let q = od.pair.demand;
        let Some(bound) = bounds.per_od.get(k).copied().flatten() else {
            continue;
        };
        if !(q > T::zero()) {
            continue;
        }
        let b = spec.bound_ranges[k];
        for i in rs.range(k) {
            let f = state.route_flows[i];
            let g = state.route_times[i];
            let term = if f > T::zero() {
                (f * (g - b / (f + T::one()) - bound.lower)).abs() / (q * b)
            } else {
                (bound.lower + b - g).pos() / b
            };
            worst = worst.max(term);
        }
    }
    worst
}

fn armijo_step<T: Scalar>(
    spec: &EUnitSueSpec<'_, T>,
    flows: &[T],
    state: &FlowState<T>,
    direction: &[T],
    z: T,
) -> Result<Option<T>> {
    let grad = eunit_gradient(state, spec)?;
    let slope: T = grad.iter().zip(direction).map(|(g, d)| *g * *d).sum();
    if !(slope < T::zero()) {
        return Ok(None);
    }
    let c = T::lit(ARMIJO_DECREASE);
    let half = T::lit(0.5);
    let mut alpha = T::one();
    let noise = T::epsilon() * T::lit(64.0) * (z.abs() + T::one());
    let mut trial = vec![T::zero(); flows.len()];
    for _ in 0..ARMIJO_MAX_HALVINGS {
        for ((t, &f), &d) in trial.iter_mut().zip(flows).zip(direction) {
            *t = (f + alpha * d).max(T::zero());
        }
        let st = load_flows(spec.network, spec.route_set, &trial)?;
        let z_trial = eunit_objective(&st, spec)?.total;
        if z_trial <= z + c * alpha * slope {
            return Ok(Some(alpha));
        }
        // Inside rounding noise the decrease test is blind; by convexity a
        // non-positive directional derivative at the trial point still
        // certifies Z(trial) <= Z(f).
        if (z_trial - z).abs() <= noise {
            let g_trial = eunit_gradient(&st, spec)?;
            let d_trial: T = g_trial.iter().zip(direction).map(|(g, d)| *g * *d).sum();
            if d_trial <= T::zero() {
                return Ok(Some(alpha));
            }
        }
        alpha = alpha * half;
    }
    Ok(None)
}

fn same_support<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| (*x > T::zero()) == (*y > T::zero()))
}

/// Solves the eUnit stochastic user equilibrium.
///
/// Zero bound ranges are dispatched to [`solve_due`]. Hitting the iteration
/// cap returns the last iterate with `converged == false`.
pub fn solve_eunit_sue<T: Scalar>(spec: &EUnitSueSpec<'_, T>) -> Result<EquilibriumSolution<T>> {
    let opts = &spec.options;
    if spec.is_deterministic() {
        let mut sol = solve_due(spec.network, spec.route_set, opts)?;
        sol.warnings
            .push("bound range is zero: solved as deterministic user equilibrium".into());
        return Ok(sol);
    }
    let rs = spec.route_set;
    let mut flows = initial_flows(spec.network, rs, opts)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut snaps = 0;

    for k in 1..=opts.max_iterations {
        iterations = k;
        let state = load_flows(spec.network, rs, &flows)?;
        let (targets, bounds) = inner_phase(spec, &state.route_times)?;
        let z = eunit_objective(&state, spec)?.total;
        let residual = kkt_residual(&state, &bounds, spec);
        trace.push(TraceRow {
            iteration: k,
            objective: z,
            residual,
        });
        let distance = scaled_distance(rs, &targets, &flows);
        if residual <= opts.kkt_tolerance || distance <= opts.flow_tolerance {
            // Averaging only shrinks flow on dropped routes geometrically; snap
            // to the target pattern so they carry exactly zero, then re-certify.
            if !same_support(&targets, &flows) && snaps < POLISH_ROUNDS {
                snaps += 1;
                flows = targets;
                continue;
            }
            converged = true;
            break;
        }
        let direction: Vec<T> = targets.iter().zip(&flows).map(|(t, f)| *t - *f).collect();
        let alpha = match opts.step {
            StepRule::Msa => T::one() / T::from_usize_lossy(k),
            StepRule::Armijo => match armijo_step(spec, &flows, &state, &direction, z)? {
                Some(a) => a,
                // No measurable decrease left at working precision.
                None => T::one() / T::from_usize_lossy(k),
            },
        };
        for (f, d) in flows.iter_mut().zip(&direction) {
            *f = (*f + alpha * *d).max(T::zero());
        }
    }

    let state = load_flows(spec.network, rs, &flows)?;
    let (_, bounds) = inner_phase(spec, &state.route_times)?;
    let objective = eunit_objective(&state, spec)?;
    let kkt = kkt_residual(&state, &bounds, spec);
    let mut warnings = Vec::new();
    for (od, bound) in rs.ods().iter().zip(&bounds.per_od) {
        if let Some(b) = bound {
            if b.lower <= T::zero() {
                let msg = format!(
                    "OD ({}, {}): lower bound {} is not positive; the perceived-time distribution is not defined there",
                    od.pair.origin, od.pair.destination, b.lower
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    if !converged {
        warnings.push(format!("not converged after {iterations} iterations (KKT residual {kkt})"));
    }
    debug!("eUnit-SUE finished: {iterations} iterations, KKT residual {kkt}");
    Ok(EquilibriumSolution {
        model: ModelKind::EUnit,
        probabilities: probabilities(rs, &state.route_flows),
        flows: state,
        bounds,
        objective,
        kkt_residual: kkt,
        iterations,
        converged,
        trace,
        warnings,
    })
}
