//! Replication suites and oracle batteries with machine-readable reports.

pub mod curves;
pub mod fixtures;
pub mod nguyen_dupuis;
pub mod oracles;
pub mod report;
pub mod three_route;

pub use curves::{choice_curves, curves_csv, CurveConfig, CurveRow};
pub use fixtures::{fixture, Fixture, FIXTURES, NGUYEN_DUPUIS, THREE_ROUTE};
pub use nguyen_dupuis::run_nguyen_dupuis_suite;
pub use oracles::{run_oracle_suites, run_oracle_suites_with, OracleConfig};
pub use report::{Check, CheckKind, Report, ReportTable};
pub use three_route::run_three_route_suite;
