//! Per-OD lower bound: the dual variable of the demand constraint.
//!
//! For fixed route times the eUnit flows are `f_r(l) = (l + b - g_r)+ / (g_r - l)`.
//! Their sum is continuous and strictly increasing on `(min g - b, min g)`,
//! rising from 0 to +∞, so `Σ f_r(l) = q` has exactly one root there.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_INNER_ITERATIONS: usize = 400;

fn check_inputs<T: Scalar>(times: &[T], b: T) -> Result<T> {
    if times.is_empty() {
        return Err(Error::Empty("route times".into()));
    }
    if let Some(g) = times.iter().find(|g| !g.is_finite()) {
        return Err(Error::domain(format!("non-finite route time {g}")));
    }
    if !(b > T::zero()) || !b.is_finite() {
        return Err(Error::domain(format!("bound range must be positive, got {b}")));
    }
    Ok(times.iter().copied().fold(T::infinity(), T::min))
}

/// Demand implied by lower bound `l` and its derivative in `l`.
fn implied_demand<T: Scalar>(times: &[T], b: T, l: T) -> (T, T) {
    let mut q = T::zero();
    let mut dq = T::zero();
    for &g in times {
        let gap = g - l;
        let num = l + b - g;
        if num > T::zero() {
            q = q + num / gap;
            dq = dq + b / (gap * gap);
        }
    }
    (q, dq)
}

/// Finds the lower bound `l < min g` with `Σ_r (l + b - g_r)+ / (g_r - l) = demand`.
///
/// Bisection inside `[min g - b, min g - ε]` (`ε = 1e-12 max(1, |min g|)`),
/// narrowed to `[min g - n b/(q + n), min g - b/(q + 1)]` when those bounds
/// bracket the root, and accelerated by Newton steps that stay inside. `tolerance`
/// bounds the demand residual relative to `max(1, demand)`.
pub fn solve_inner_lower_bound<T: Scalar>(times: &[T], b: T, demand: T, tolerance: T) -> Result<T> {
    let g_min = check_inputs(times, b)?;
    if !(demand > T::zero()) || !demand.is_finite() {
        return Err(Error::domain(format!("demand must be positive, got {demand}")));
    }
    let scale = demand.max(T::one());
    let n = T::from_usize_lossy(times.len());
    // Every route at the shortest time gives the smallest admissible l;
    // the shortest route alone carrying all demand gives the largest.
    let mut lo = (g_min - b).max(g_min - n * b / (demand + n));
    let mut hi = g_min - b / (demand + T::one());
    if implied_demand(times, b, lo).0 > demand {
        lo = g_min - b;
    }
    if implied_demand(times, b, hi).0 < demand {
        hi = g_min - T::lit(1e-12) * g_min.abs().max(T::one());
        let (q_hi, _) = implied_demand(times, b, hi);
        if q_hi < demand {
            return Err(Error::RootNotConverged {
                iterations: 0,
                lo: lo.as_f64(),
                hi: hi.as_f64(),
                residual: (q_hi - demand).as_f64(),
            });
        }
    }
    // Start from the right end, where the demand map is convex and Newton
    // steps approach the root monotonically.
    let mut l = hi;
    for _ in 0..MAX_INNER_ITERATIONS {
        let (q, dq) = implied_demand(times, b, l);
        let residual = q - demand;
        if residual.abs() <= tolerance * scale {
            // One extra Newton correction, kept only if it stays bracketed.
            if dq > T::zero() {
                let polished = l - residual / dq;
                if polished > lo && polished < hi {
                    return Ok(polished);
                }
            }
            return Ok(l);
        }
        if residual > T::zero() {
            hi = l;
        } else {
            lo = l;
        }
        let newton = if dq > T::zero() { l - residual / dq } else { T::nan() };
        l = if newton > lo && newton < hi {
            newton
        } else {
            lo + (hi - lo) / (T::one() + T::one())
        };
        if hi - lo <= T::epsilon() * T::lit(4.0) * l.abs().max(T::one()) {
            return Ok(l);
        }
    }
    let (q, _) = implied_demand(times, b, l);
    Err(Error::RootNotConverged {
        iterations: MAX_INNER_ITERATIONS,
        lo: lo.as_f64(),
        hi: hi.as_f64(),
        residual: (q - demand).as_f64(),
    })
}

/// eUnit route flows `(l + b - g_r)+ / (g_r - l)`; exactly zero once `g_r ≥ l + b`.
pub fn eunit_route_flows_from_bound<T: Scalar>(times: &[T], lower: T, b: T) -> Result<Vec<T>> {
    let g_min = check_inputs(times, b)?;
    if !(lower < g_min) {
        return Err(Error::domain(format!(
            "lower bound {lower} must lie below the shortest route time {g_min}"
        )));
    }
    Ok(times
        .iter()
        .map(|&g| (lower + b - g).pos() / (g - lower))
        .collect())
}
