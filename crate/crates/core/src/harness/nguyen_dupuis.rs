use crate::error::{Error, Result};
use crate::network::NodeId;
use crate::scenario::{ModelName, Scenario};
use crate::solver::{solve_bsue_fixed_point, EquilibriumSolution, SolverOptions, StepRule};

use super::fixtures::NGUYEN_DUPUIS;
use super::report::{CheckKind, Report, ReportTable};

pub const BOUND_RANGE: f64 = 10.0;
pub const BSUE_SCALE: f64 = 0.1;
pub const BSUE_THRESHOLD: f64 = 10.0;
/// BSUE is iterated by plain successive averages, whose fixed-point gap
/// decays like 1/k on congested instances; 1e-6 of demand is far below the
/// two-decimal percentage resolution of the comparison.
pub const BSUE_FLOW_TOLERANCE: f64 = 1e-6;
pub const DEMAND_LEVELS: [f64; 3] = [50.0, 100.0, 150.0];
/// Tolerance for published percentages, in percentage points.
pub const PERCENT_TOLERANCE: f64 = 5.0;

/// Published route choice percentages, per demand level and OD pair.
pub struct PublishedRow {
    pub od: (NodeId, NodeId),
    pub eunit: &'static [f64],
    pub bsue: &'static [f64],
}

pub const PUBLISHED: [[PublishedRow; 4]; 3] = [
    [
        PublishedRow {
            od: (1, 2),
            eunit: &[0.0, 0.0, 1.79, 1.76, 87.84, 0.0, 8.61, 0.0],
            bsue: &[9.93, 10.57, 11.67, 10.86, 31.97, 12.92, 12.08, 0.0],
        },
        PublishedRow {
            od: (4, 2),
            eunit: &[0.0, 0.0, 0.12, 99.88, 0.0],
            bsue: &[4.04, 2.23, 1.32, 92.31, 0.1],
        },
        PublishedRow {
            od: (1, 3),
            eunit: &[98.48, 0.0, 0.0, 0.0, 1.52, 0.0],
            bsue: &[78.53, 3.7, 5.54, 4.76, 0.0, 7.46],
        },
        PublishedRow {
            od: (4, 3),
            eunit: &[0.0, 0.0, 0.0, 99.75, 0.0, 0.25],
            bsue: &[0.12, 0.0, 0.0, 96.44, 0.0, 3.44],
        },
    ],
    [
        PublishedRow {
            od: (1, 2),
            eunit: &[0.0, 0.0, 3.67, 1.03, 95.31, 0.0, 0.0, 0.0],
            bsue: &[0.9, 4.48, 9.43, 5.83, 53.65, 14.8, 10.91, 0.0],
        },
        PublishedRow {
            od: (4, 2),
            eunit: &[0.0, 0.0, 0.08, 99.92, 0.0],
            bsue: &[14.16, 9.14, 6.59, 67.9, 2.21],
        },
        PublishedRow {
            od: (1, 3),
            eunit: &[83.58, 1.59, 4.23, 3.22, 3.69, 3.68],
            bsue: &[48.61, 7.85, 13.3, 11.64, 0.0, 18.6],
        },
        PublishedRow {
            od: (4, 3),
            eunit: &[0.0, 0.0, 0.0, 88.17, 0.0, 11.83],
            bsue: &[0.62, 0.0, 0.0, 86.55, 1.7, 11.13],
        },
    ],
    [
        PublishedRow {
            od: (1, 2),
            eunit: &[0.0, 0.0, 0.0, 1.21, 98.79, 0.0, 0.0, 0.0],
            bsue: &[0.0, 0.0, 4.49, 6.9, 81.17, 2.59, 4.84, 0.0],
        },
        PublishedRow {
            od: (4, 2),
            eunit: &[0.75, 0.0, 1.54, 97.72, 0.0],
            bsue: &[15.16, 17.38, 8.07, 55.69, 3.7],
        },
        PublishedRow {
            od: (1, 3),
            eunit: &[25.92, 0.0, 65.85, 1.91, 1.16, 5.17],
            bsue: &[39.48, 8.74, 20.14, 12.67, 0.0, 18.97],
        },
        PublishedRow {
            od: (4, 3),
            eunit: &[0.0, 0.0, 0.0, 98.14, 0.0, 1.86],
            bsue: &[0.35, 0.0, 0.0, 78.76, 5.02, 15.87],
        },
    ],
];

/// Fixture scenario with every OD demand set to `demand`.
pub fn scenario(demand: f64) -> Result<Scenario> {
    let mut cfg = NGUYEN_DUPUIS.config(ModelName::EUnit);
    cfg.b = Some(BOUND_RANGE);
    cfg.theta = Some(BSUE_SCALE);
    cfg.rho = Some(BSUE_THRESHOLD);
    cfg.solver.step = Some(StepRule::Armijo.to_string());
    cfg.solver.max_iterations = Some(200_000);
    let base = NGUYEN_DUPUIS.scenario(cfg)?;
    let route_set = base.route_set.with_demands(&vec![demand; base.route_set.od_count()])?;
    let mut inputs = base.inputs.clone();
    inputs.demand = crate::scenario::demand_csv(&route_set);
    Scenario::from_parts(base.config.clone(), inputs, std::path::Path::new(NGUYEN_DUPUIS.name))
}

fn percentages(sol: &EquilibriumSolution<f64>, s: &Scenario, od: (NodeId, NodeId)) -> Vec<f64> {
    let k = s.route_set.find_od(od.0, od.1).expect("fixture OD");
    sol.probabilities[s.route_set.range(k)].iter().map(|p| 100.0 * p).collect()
}

fn dominant(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold(0, |best, (i, x)| if *x > p[best] { i } else { best })
}

fn zeros(p: &[f64]) -> Vec<usize> {
    (0..p.len()).filter(|&i| p[i] == 0.0).map(|i| i + 1).collect()
}

fn round2(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

/// eUnit-SUE and BSUE on the Nguyen-Dupuis network at one demand level.
///
/// At the published levels (50, 100, 150) the route choice percentages are
/// compared with the published ones: zero patterns, dominant routes and the
/// eUnit-only exclusions are required, individual percentages are tracked
/// within 5 points.
pub fn run_nguyen_dupuis_suite(demand: f64) -> Result<Report> {
    if !(demand > 0.0) || !demand.is_finite() {
        return Err(Error::domain(format!("demand level must be positive, got {demand}")));
    }
    let mut report = Report::new(format!("nguyen-dupuis demand {demand}"));
    let s = scenario(demand)?;
    let eu = s.solve()?;
    let bsue_options = SolverOptions {
        flow_tolerance: BSUE_FLOW_TOLERANCE,
        ..s.options.clone()
    };
    let bs = solve_bsue_fixed_point(&s.network, &s.route_set, BSUE_SCALE, BSUE_THRESHOLD, &bsue_options)?;
    report.push(
        "eunit converged",
        CheckKind::Exact,
        eu.converged,
        format!("{} iterations, KKT residual {:.3e}", eu.iterations, eu.kkt_residual),
    );
    report.push(
        "bsue converged",
        CheckKind::Exact,
        bs.converged,
        format!("{} iterations, flow gap {:.3e}", bs.iterations, bs.kkt_residual),
    );

    let level = DEMAND_LEVELS.iter().position(|d| *d == demand);
    let mut rows = Vec::new();
    for od in s.route_set.ods() {
        let key = (od.pair.origin, od.pair.destination);
        let pe = percentages(&eu, &s, key);
        let pb = percentages(&bs, &s, key);
        for (model, p) in [("eunit", &pe), ("bsue", &pb)] {
            let total: f64 = round2(p).iter().sum();
            report.push(
                format!("OD({},{}) {model} percentages sum to 100", key.0, key.1),
                CheckKind::Exact,
                (total - 100.0).abs() <= 0.02,
                format!("sum {total:.2}"),
            );
            let mut row = vec![format!("({},{})", key.0, key.1), model.to_string()];
            row.extend(p.iter().map(|x| format!("{x:.2}")));
            rows.push(row);
        }
        let Some(level) = level else { continue };
        let published = PUBLISHED[level].iter().find(|r| r.od == key).expect("published OD");
        let tag = format!("scenario {} OD({},{})", level + 1, key.0, key.1);
        for (model, ours, theirs) in [("eunit", &pe, published.eunit), ("bsue", &pb, published.bsue)] {
            report.push(
                format!("{tag} {model} zero pattern"),
                CheckKind::Contingent,
                zeros(ours) == zeros(theirs),
                format!("zero routes {:?}, published {:?}", zeros(ours), zeros(theirs)),
            );
            report.push(
                format!("{tag} {model} dominant route"),
                CheckKind::Contingent,
                dominant(ours) == dominant(theirs),
                format!("route {} ({:.2}%), published route {} ({:.2}%)",
                    dominant(ours) + 1, ours[dominant(ours)], dominant(theirs) + 1, theirs[dominant(theirs)]),
            );
            let worst = ours
                .iter()
                .zip(theirs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            report.track(
                format!("{tag} {model} percentages"),
                CheckKind::Contingent,
                worst <= PERCENT_TOLERANCE,
                format!("ours {:?}, published {:?}, max deviation {worst:.2} points", round2(ours), theirs),
            );
        }
        // Routes the published eUnit result drops while BSUE keeps them.
        let only_bsue: Vec<usize> = (0..pe.len())
            .filter(|&i| published.eunit[i] == 0.0 && published.bsue[i] > 0.0)
            .collect();
        if !only_bsue.is_empty() {
            let ok = only_bsue.iter().all(|&i| pe[i] == 0.0 && pb[i] > 0.0);
            report.push(
                format!("{tag} eunit excludes routes bsue keeps"),
                CheckKind::Contingent,
                ok,
                format!(
                    "routes {:?}: eunit {:?}, bsue {:?}",
                    only_bsue.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    only_bsue.iter().map(|&i| format!("{:.2}", pe[i])).collect::<Vec<_>>(),
                    only_bsue.iter().map(|&i| format!("{:.2}", pb[i])).collect::<Vec<_>>()
                ),
            );
        }
    }
    let width = s.route_set.ods().iter().map(|o| o.routes.len()).max().unwrap_or(0);
    let mut columns = vec!["od".to_string(), "model".to_string()];
    columns.extend((1..=width).map(|r| format!("route_{r}")));
    report.tables.push(ReportTable {
        name: "route choice percentages".into(),
        columns,
        rows,
    });
    let mut bounds = Vec::new();
    for (k, od) in s.route_set.ods().iter().enumerate() {
        for (model, sol) in [("eunit", &eu), ("bsue", &bs)] {
            if let Some(b) = sol.bounds.per_od[k] {
                bounds.push(vec![
                    format!("({},{})", od.pair.origin, od.pair.destination),
                    model.into(),
                    format!("{:.3}", b.lower),
                    format!("{:.3}", b.upper),
                ]);
            }
        }
    }
    report.tables.push(ReportTable {
        name: "bounds".into(),
        columns: ["od", "model", "lower", "upper"].map(String::from).to_vec(),
        rows: bounds,
    });
    Ok(report)
}
