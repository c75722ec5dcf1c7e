use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solver::EquilibriumSolution;

use super::tables::{fmt6, fmt_sci, join_ids};
use super::Scenario;

/// Files written by [`write_results`], in write order.
pub const RESULT_FILES: [&str; 5] = ["routes.csv", "links.csv", "bounds.csv", "trace.csv", "summary.json"];

/// A solved scenario ready to serialize.
#[derive(Debug, Clone, Copy)]
pub struct ResultBundle<'a> {
    pub scenario: &'a Scenario,
    pub solution: &'a EquilibriumSolution<f64>,
    /// Seconds spent solving. Left out of `summary.json` when `None` so that
    /// reruns produce identical bytes.
    pub wall_time: Option<f64>,
}

/// Writes `contents` to a sibling temp file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

impl ResultBundle<'_> {
    fn check(&self) -> Result<()> {
        let rs = &self.scenario.route_set;
        if rs.route_count() == 0 {
            return Err(Error::Empty("scenario has no routes".into()));
        }
        if self.solution.flows.route_flows.len() != rs.route_count() {
            return Err(Error::structure("solution does not match the scenario's route set"));
        }
        for (k, od) in rs.ods().iter().enumerate() {
            let q = od.pair.demand;
            if q <= 0.0 {
                continue;
            }
            let range = rs.range(k);
            let flow: f64 = self.solution.flows.route_flows[range.clone()].iter().sum();
            let prob: f64 = self.solution.probabilities[range].iter().sum();
            if (flow - q).abs() > 1e-9 * q.max(1.0) || (prob - 1.0).abs() > 1e-9 {
                return Err(Error::structure(format!(
                    "OD ({}, {}): flows sum to {flow}, probabilities to {prob}",
                    od.pair.origin, od.pair.destination
                )));
            }
        }
        Ok(())
    }

    pub fn routes_csv(&self) -> String {
        let rs = &self.scenario.route_set;
        let st = &self.solution.flows;
        let mut out = String::from("origin,destination,route_id,link_ids,flow,time,probability\n");
        let mut i = 0;
        for od in rs.ods() {
            for (j, r) in od.routes.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    od.pair.origin,
                    od.pair.destination,
                    j + 1,
                    join_ids(r.link_ids()),
                    fmt6(st.route_flows[i]),
                    fmt6(st.route_times[i]),
                    fmt6(self.solution.probabilities[i])
                );
                i += 1;
            }
        }
        out
    }

    pub fn links_csv(&self) -> String {
        let st = &self.solution.flows;
        let mut out = String::from("link,from,to,flow,time\n");
        for (l, (v, t)) in self.scenario.network.links().iter().zip(st.link_flows.iter().zip(&st.link_times)) {
            let _ = writeln!(out, "{},{},{},{},{}", l.id, l.tail, l.head, fmt6(*v), fmt6(*t));
        }
        out
    }

    /// eUnit rows hold `(l, u)`; BSUE rows `(min g, min g + rho)`; DUE rows
    /// `(min g, min g)`. OD pairs without bounds have empty cells.
    pub fn bounds_csv(&self) -> String {
        let mut out = String::from("origin,destination,model,lower,upper\n");
        for (od, b) in self.scenario.route_set.ods().iter().zip(&self.solution.bounds.per_od) {
            let (l, u) = b.map_or((String::new(), String::new()), |b| (fmt6(b.lower), fmt6(b.upper)));
            let _ = writeln!(
                out,
                "{},{},{},{l},{u}",
                od.pair.origin,
                od.pair.destination,
                self.solution.model.name()
            );
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective,residual\n");
        for row in &self.solution.trace {
            let _ = writeln!(out, "{},{},{}", row.iteration, fmt6(row.objective), fmt_sci(row.residual));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let s = self.solution;
        let list = |items: &[String]| {
            if items.is_empty() {
                "[]".to_string()
            } else {
                let body: Vec<String> = items.iter().map(|w| format!("    {}", json_str(w))).collect();
                format!("[\n{}\n  ]", body.join(",\n"))
            }
        };
        let mut fields = vec![
            ("name", json_str(&self.scenario.name)),
            ("model", json_str(s.model.name())),
            ("input_hash", json_str(&self.scenario.input_hash())),
            ("od_pairs", self.scenario.route_set.od_count().to_string()),
            ("routes", self.scenario.route_set.route_count().to_string()),
            ("objective", fmt6(s.objective.total)),
            ("z1", fmt6(s.objective.beckmann)),
            ("z2", fmt6(s.objective.route_term)),
            ("kkt_residual", fmt_sci(s.kkt_residual)),
            ("iterations", s.iterations.to_string()),
            ("converged", s.converged.to_string()),
            ("notes", list(&self.scenario.notes)),
            ("warnings", list(&s.warnings)),
        ];
        if let Some(t) = self.wall_time {
            fields.push(("wall_time_seconds", fmt6(t)));
        }
        let body: Vec<String> = fields.iter().map(|(k, v)| format!("  {}: {v}", json_str(k))).collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

/// Writes the result tables into `dir` (created if needed) and returns the
/// written paths.
pub fn write_results(bundle: &ResultBundle<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    bundle.check()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let contents = [
        bundle.routes_csv(),
        bundle.links_csv(),
        bundle.bounds_csv(),
        bundle.trace_csv(),
        bundle.summary_json(),
    ];
    let mut written = Vec::with_capacity(RESULT_FILES.len());
    for (name, text) in RESULT_FILES.iter().zip(contents) {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
