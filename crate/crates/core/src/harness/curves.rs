//! Choice probability versus a common time shift `x` for the four models.

use std::fmt::Write as _;

use crate::choice::{bc_prob, eunit_prob, mnl_prob, mnw_prob};
use crate::error::{Error, Result};
use crate::scenario::fmt6;

/// Route times are `x + offsets[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub offsets: Vec<f64>,
    pub x_from: f64,
    pub x_to: f64,
    pub steps: usize,
    pub mnl_dispersion: f64,
    pub mnw_shape: f64,
    pub mnw_location: f64,
    pub bc_scale: f64,
    pub bc_threshold: f64,
    pub eunit_lower: f64,
    pub eunit_upper: f64,
}

impl Default for CurveConfig {
    /// Middle route shortest, 5 time units between routes.
    fn default() -> Self {
        CurveConfig {
            offsets: vec![5.0, 0.0, 10.0],
            x_from: 5.0,
            x_to: 25.0,
            steps: 201,
            mnl_dispersion: 1.0,
            mnw_shape: 2.5,
            mnw_location: 0.0,
            bc_scale: 1.0,
            bc_threshold: 25.0,
            eunit_lower: 4.75,
            eunit_upper: 29.75,
        }
    }
}

/// One grid point; a model's entry is `None` where it is undefined (e.g.
/// eUnit when a route time is at or below `l`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub times: Vec<f64>,
    pub mnl: Vec<f64>,
    pub mnw: Option<Vec<f64>>,
    pub bc: Vec<f64>,
    pub eunit: Option<Vec<f64>>,
}

pub fn choice_curves(cfg: &CurveConfig) -> Result<Vec<CurveRow>> {
    if cfg.offsets.is_empty() {
        return Err(Error::Empty("curve offsets".into()));
    }
    if cfg.steps < 2 || !(cfg.x_to > cfg.x_from) {
        return Err(Error::domain("curves need at least two points on an increasing x range"));
    }
    let dx = (cfg.x_to - cfg.x_from) / (cfg.steps - 1) as f64;
    (0..cfg.steps)
        .map(|i| {
            let x = cfg.x_from + dx * i as f64;
            let times: Vec<f64> = cfg.offsets.iter().map(|o| x + o).collect();
            Ok(CurveRow {
                mnl: mnl_prob(&times, cfg.mnl_dispersion)?.into_vec(),
                mnw: mnw_prob(&times, cfg.mnw_shape, cfg.mnw_location).ok().map(|p| p.into_vec()),
                bc: bc_prob(&times, cfg.bc_scale, cfg.bc_threshold)?.into_vec(),
                eunit: eunit_prob(&times, cfg.eunit_lower, cfg.eunit_upper).ok().map(|p| p.into_vec()),
                times,
                x,
            })
        })
        .collect()
}

/// Wide table: `x`, route times, then per-model probability columns.
pub fn curves_csv(rows: &[CurveRow]) -> String {
    let n = rows.first().map_or(0, |r| r.times.len());
    let mut header = vec!["x".to_string()];
    for prefix in ["time", "mnl", "mnw", "bc", "eunit"] {
        header.extend((1..=n).map(|r| format!("{prefix}_{r}")));
    }
    let mut out = header.join(",") + "\n";
    let cells = |v: Option<&Vec<f64>>| match v {
        Some(v) => v.iter().map(|p| fmt6(*p)).collect::<Vec<_>>(),
        None => vec![String::new(); n],
    };
    for r in rows {
        let mut line = vec![fmt6(r.x)];
        line.extend(cells(Some(&r.times)));
        line.extend(cells(Some(&r.mnl)));
        line.extend(cells(r.mnw.as_ref()));
        line.extend(cells(Some(&r.bc)));
        line.extend(cells(r.eunit.as_ref()));
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_route_leaves_eunit_support_at_upper_bound() {
        let rows = choice_curves(&CurveConfig::default()).unwrap();
        for r in &rows {
            let p = r.eunit.as_ref().unwrap();
            if r.times[2] >= 29.75 {
                assert_eq!(p[2], 0.0);
            } else {
                assert!(p[2] > 0.0);
            }
            // BC keeps the longest route until its gap reaches the threshold (never here).
            assert!(r.bc[2] > 0.0);
        }
        assert!(rows.iter().any(|r| r.times[2] > 29.75));
    }

    #[test]
    fn table_shape() {
        let cfg = CurveConfig {
            steps: 3,
            ..Default::default()
        };
        let csv = curves_csv(&choice_curves(&cfg).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 16);
        assert!(lines[1].starts_with("5.000000,10.000000,5.000000,15.000000"));
    }
}
