//! Scenario files, table ingestion and result serialization.
//!
//! A scenario is a JSON document naming the links, demand and (optional)
//! route tables plus the model and solver settings:
//!
//! ```json
//! {
//!   "name": "three-route",
//!   "network": "links.csv",
//!   "demand": "demand.csv",
//!   "routes": "routes.csv",
//!   "model": "eunit",
//!   "b": 1.0,
//!   "b_per_od": [{ "origin": 1, "destination": 2, "b": 2.0 }],
//!   "solver": { "max_iterations": 20000, "kkt_tolerance": 1e-9, "step": "armijo" },
//!   "seed": 0,
//!   "output": "results"
//! }
//! ```
//!
//! `model` is one of `eunit` (needs `b`, `b_per_od`, or `lower`/`upper`),
//! `bsue` (`theta`, `rho`), `mnl-sue` (`dispersion`) or `due`. Relative
//! paths resolve against the scenario file's directory. Without a route
//! table, routes are enumerated under `enumeration` limits.

mod results;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{EnumerationLimits, Network, NodeId, OdPair, RouteSet};
use crate::solver::{
    solve_bsue_fixed_point, solve_due, solve_eunit_sue, solve_mnl_sue, EUnitSueSpec, EquilibriumSolution,
    InitMode, SolverOptions, StepRule,
};

pub use results::{write_atomic, write_results, ResultBundle, RESULT_FILES};
pub use tables::{
    demand_csv, fmt6, fmt_sci, join_ids, links_csv, parse_demand, parse_links, parse_routes, routes_csv,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "eunit")]
    EUnit,
    #[serde(rename = "bsue")]
    Bsue,
    #[serde(rename = "mnl-sue")]
    MnlSue,
    #[serde(rename = "due")]
    Due,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::EUnit => "eunit",
            ModelName::Bsue => "bsue",
            ModelName::MnlSue => "mnl-sue",
            ModelName::Due => "due",
        }
    }
}

impl std::fmt::Display for ModelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eunit" => Ok(ModelName::EUnit),
            "bsue" => Ok(ModelName::Bsue),
            "mnl-sue" | "mnl" => Ok(ModelName::MnlSue),
            "due" => Ok(ModelName::Due),
            other => Err(Error::scenario("model", format!("unknown model `{other}` (eunit | bsue | mnl-sue | due)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdBoundRange {
    pub origin: NodeId,
    pub destination: NodeId,
    pub b: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: Option<usize>,
    pub flow_tolerance: Option<f64>,
    pub kkt_tolerance: Option<f64>,
    pub inner_tolerance: Option<f64>,
    pub step: Option<String>,
    /// `uniform`, `all-or-nothing` or `random`.
    pub init: Option<String>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerationConfig {
    pub max_routes: Option<usize>,
    pub max_links: Option<usize>,
}

/// The scenario file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub network: PathBuf,
    pub demand: PathBuf,
    #[serde(default)]
    pub routes: Option<PathBuf>,
    pub model: ModelName,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub b_per_od: Vec<OdBoundRange>,
    /// Bounds given directly; only their difference `upper - lower` is used,
    /// since the lower bound is determined by the equilibrium.
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub dispersion: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub enumeration: EnumerationConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Config for the given table paths and model, everything else default.
    pub fn new(network: impl Into<PathBuf>, demand: impl Into<PathBuf>, model: ModelName) -> Self {
        ScenarioConfig {
            name: None,
            network: network.into(),
            demand: demand.into(),
            routes: None,
            model,
            b: None,
            b_per_od: Vec::new(),
            lower: None,
            upper: None,
            theta: None,
            rho: None,
            dispersion: None,
            solver: SolverConfig::default(),
            enumeration: EnumerationConfig::default(),
            seed: 0,
            output: None,
        }
    }
}

/// Table contents backing a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioInputs {
    pub links: String,
    pub demand: String,
    pub routes: Option<String>,
}

impl ScenarioInputs {
    /// Reads the tables named in `config`, relative to `base`.
    pub fn read(config: &ScenarioConfig, base: &Path) -> Result<Self> {
        let read = |p: &Path| {
            let full = base.join(p);
            fs::read_to_string(&full).map_err(|e| Error::io(full, e))
        };
        Ok(ScenarioInputs {
            links: read(&config.network)?,
            demand: read(&config.demand)?,
            routes: config.routes.as_deref().map(read).transpose()?,
        })
    }
}

/// Model with resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Bound range per OD pair, in route-set order.
    EUnit { bound_ranges: Vec<f64> },
    Bsue { scale: f64, threshold: f64 },
    MnlSue { dispersion: f64 },
    Due,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::EUnit { .. } => "eunit",
            ModelSpec::Bsue { .. } => "bsue",
            ModelSpec::MnlSue { .. } => "mnl-sue",
            ModelSpec::Due => "due",
        }
    }
}

/// A validated, fully loaded scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub inputs: ScenarioInputs,
    pub network: Network<f64>,
    pub route_set: RouteSet<f64>,
    /// Per OD: whether route enumeration hit a limit.
    pub routes_truncated: Vec<bool>,
    pub model: ModelSpec,
    pub options: SolverOptions<f64>,
    pub output: Option<PathBuf>,
    /// Informational messages from validation (e.g. model dispatch).
    pub notes: Vec<String>,
}

fn positive(field: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(Error::scenario(field, format!("must be positive, got {x}"))),
        None => Err(Error::scenario(field, "required for this model")),
    }
}

fn solver_options(cfg: &SolverConfig, seed: u64) -> Result<SolverOptions<f64>> {
    let mut o = SolverOptions::<f64> {
        seed,
        ..Default::default()
    };
    if let Some(v) = cfg.max_iterations {
        o.max_iterations = v;
    }
    if let Some(v) = cfg.flow_tolerance {
        o.flow_tolerance = v;
    }
    if let Some(v) = cfg.kkt_tolerance {
        o.kkt_tolerance = v;
    }
    if let Some(v) = cfg.inner_tolerance {
        o.inner_tolerance = v;
    }
    if let Some(s) = &cfg.step {
        o.step = s.parse::<StepRule>()?;
    }
    if let Some(s) = &cfg.init {
        o.init = match s.as_str() {
            "uniform" => InitMode::Uniform,
            "all-or-nothing" | "aon" => InitMode::AllOrNothing,
            "random" => InitMode::Random,
            other => {
                return Err(Error::scenario(
                    "solver.init",
                    format!("unknown init `{other}` (uniform | all-or-nothing | random)"),
                ))
            }
        };
    }
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(Error::scenario("solver.workers", "must be at least 1"));
        }
        o.workers = w;
    }
    o.validate()?;
    Ok(o)
}

fn eunit_ranges(config: &ScenarioConfig, pairs: &[OdPair<f64>], notes: &mut Vec<String>) -> Result<ModelSpec> {
    let direct = match (config.lower, config.upper) {
        (Some(l), Some(u)) => {
            if !(u > l) {
                return Err(Error::scenario(
                    "upper",
                    format!("upper bound must exceed lower bound (u > l), got l = {l}, u = {u}"),
                ));
            }
            Some(u - l)
        }
        (None, None) => None,
        _ => return Err(Error::scenario("lower", "`lower` and `upper` must be given together")),
    };
    if direct.is_some() && config.b.is_some() {
        return Err(Error::scenario("b", "give either `b` or `lower`/`upper`, not both"));
    }
    let global = config.b.or(direct);
    let mut ranges = vec![global; pairs.len()];
    for o in &config.b_per_od {
        let k = pairs
            .iter()
            .position(|p| p.origin == o.origin && p.destination == o.destination)
            .ok_or_else(|| {
                Error::scenario(
                    "b_per_od",
                    format!("OD ({}, {}) is not in the demand table", o.origin, o.destination),
                )
            })?;
        ranges[k] = Some(o.b);
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (p, r) in pairs.iter().zip(ranges) {
        let b = r.ok_or_else(|| {
            Error::scenario("b", format!("no bound range for OD ({}, {})", p.origin, p.destination))
        })?;
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::scenario("b", format!("bound range must be non-negative, got {b}")));
        }
        out.push(b);
    }
    let zeros = out.iter().filter(|b| **b == 0.0).count();
    if zeros == out.len() {
        notes.push("b = 0: eUnit reduces to deterministic user equilibrium; solving as DUE".into());
        return Ok(ModelSpec::Due);
    }
    if zeros > 0 {
        return Err(Error::scenario(
            "b",
            "bound ranges must be all positive or all zero (zero means deterministic equilibrium)",
        ));
    }
    Ok(ModelSpec::EUnit { bound_ranges: out })
}

impl Scenario {
    /// Validates `config` against already-read tables. `base` is only used
    /// in error messages.
    pub fn from_parts(config: ScenarioConfig, inputs: ScenarioInputs, base: &Path) -> Result<Self> {
        let network = parse_links(&inputs.links, &base.join(&config.network))?;
        let pairs = parse_demand(&inputs.demand, &base.join(&config.demand))?;
        for p in &pairs {
            for n in [p.origin, p.destination] {
                if !network.contains_node(n) {
                    return Err(Error::scenario("demand", format!("node {n} is not in the network")));
                }
            }
        }
        let (route_set, routes_truncated) = match (&inputs.routes, &config.routes) {
            (Some(text), Some(path)) => (
                parse_routes(text, &base.join(path), &network, &pairs)?,
                vec![false; pairs.len()],
            ),
            _ => {
                let d = EnumerationLimits::default();
                let limits = EnumerationLimits {
                    max_routes: config.enumeration.max_routes.unwrap_or(d.max_routes),
                    max_links: config.enumeration.max_links.or(d.max_links),
                };
                RouteSet::enumerate(&network, &pairs, limits)?
            }
        };
        let mut notes = Vec::new();
        for (od, t) in route_set.ods().iter().zip(&routes_truncated) {
            if *t {
                notes.push(format!(
                    "route enumeration truncated for OD ({}, {})",
                    od.pair.origin, od.pair.destination
                ));
            }
        }
        let model = match config.model {
            ModelName::EUnit => eunit_ranges(&config, &pairs, &mut notes)?,
            ModelName::Bsue => {
                let scale = positive("theta", config.theta)?;
                let threshold = match config.rho {
                    Some(r) if r >= 0.0 && r.is_finite() => r,
                    Some(r) => return Err(Error::scenario("rho", format!("must be non-negative, got {r}"))),
                    None => return Err(Error::scenario("rho", "required for this model")),
                };
                ModelSpec::Bsue { scale, threshold }
            }
            ModelName::MnlSue => ModelSpec::MnlSue {
                dispersion: positive("dispersion", config.dispersion)?,
            },
            ModelName::Due => ModelSpec::Due,
        };
        let options = solver_options(&config.solver, config.seed)?;
        Ok(Scenario {
            name: config.name.clone().unwrap_or_else(|| "scenario".into()),
            output: config.output.as_ref().map(|o| base.join(o)),
            config,
            inputs,
            network,
            route_set,
            routes_truncated,
            model,
            options,
            notes,
        })
    }

    /// Solves with the scenario's model.
    pub fn solve(&self) -> Result<EquilibriumSolution<f64>> {
        self.solve_model(&self.model)
    }

    pub fn solve_model(&self, model: &ModelSpec) -> Result<EquilibriumSolution<f64>> {
        let (net, rs, opts) = (&self.network, &self.route_set, &self.options);
        match model {
            ModelSpec::EUnit { bound_ranges } => {
                solve_eunit_sue(&EUnitSueSpec::new(net, rs, bound_ranges.clone(), opts.clone())?)
            }
            ModelSpec::Bsue { scale, threshold } => solve_bsue_fixed_point(net, rs, *scale, *threshold, opts),
            ModelSpec::MnlSue { dispersion } => solve_mnl_sue(net, rs, *dispersion, opts),
            ModelSpec::Due => solve_due(net, rs, opts),
        }
    }

    /// SHA-256 over the table contents, the resolved model and the solver
    /// options. File locations and the worker count do not enter the hash.
    pub fn input_hash(&self) -> String {
        let mut h = Sha256::new();
        for (tag, text) in [
            ("links", Some(&self.inputs.links)),
            ("demand", Some(&self.inputs.demand)),
            ("routes", self.inputs.routes.as_ref()),
        ] {
            h.update(tag.as_bytes());
            h.update([0]);
            if let Some(t) = text {
                h.update(t.as_bytes());
            }
            h.update([0]);
        }
        h.update(format!("{:?}", self.model).as_bytes());
        h.update([0]);
        // Worker count does not change results, so it stays out of the hash.
        let options = SolverOptions {
            workers: 1,
            ..self.options.clone()
        };
        h.update(format!("{options:?}").as_bytes());
        hex::encode(h.finalize())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let inputs = ScenarioInputs::read(&config, base)?;
    Scenario::from_parts(config, inputs, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINKS: &str = "from,to,fftt,capacity\n1,2,5,100\n1,2,6,100\n";
    const DEMAND: &str = "origin,destination,demand\n1,2,10\n";

    fn build(mut edit: impl FnMut(&mut ScenarioConfig)) -> Result<Scenario> {
        let mut cfg = ScenarioConfig::new("links.csv", "demand.csv", ModelName::EUnit);
        cfg.b = Some(1.0);
        edit(&mut cfg);
        let inputs = ScenarioInputs {
            links: LINKS.into(),
            demand: DEMAND.into(),
            routes: None,
        };
        Scenario::from_parts(cfg, inputs, Path::new("."))
    }

    #[test]
    fn minimal_scenario_takes_defaults() {
        let s = build(|_| {}).unwrap();
        assert_eq!(s.route_set.route_count(), 2);
        assert_eq!(s.options.step, StepRule::Msa);
        assert_eq!(s.network.link(1).unwrap().alpha, 0.15);
        assert_eq!(s.model, ModelSpec::EUnit { bound_ranges: vec![1.0] });
    }

    #[test]
    fn zero_b_dispatches_to_due() {
        let s = build(|c| c.b = Some(0.0)).unwrap();
        assert_eq!(s.model, ModelSpec::Due);
        assert!(!s.notes.is_empty());
    }

    #[test]
    fn inverted_bounds_rejected() {
        let err = build(|c| {
            c.b = None;
            c.lower = Some(5.0);
            c.upper = Some(5.0);
        })
        .unwrap_err();
        assert!(err.to_string().contains("u > l"), "{err}");
        let ok = build(|c| {
            c.b = None;
            c.lower = Some(5.0);
            c.upper = Some(7.5);
        })
        .unwrap();
        assert_eq!(ok.model, ModelSpec::EUnit { bound_ranges: vec![2.5] });
    }

    #[test]
    fn per_od_override_and_missing_params() {
        let s = build(|c| {
            c.b_per_od = vec![OdBoundRange {
                origin: 1,
                destination: 2,
                b: 3.0,
            }]
        })
        .unwrap();
        assert_eq!(s.model, ModelSpec::EUnit { bound_ranges: vec![3.0] });
        assert!(build(|c| c.model = ModelName::Bsue).is_err());
        assert!(build(|c| c.model = ModelName::MnlSue).is_err());
        let err = build(|c| c.solver.step = Some("newton".into())).unwrap_err();
        assert!(err.to_string().contains("step"));
    }

    #[test]
    fn unknown_json_fields_rejected() {
        let bad = r#"{"network":"l.csv","demand":"d.csv","model":"eunit","bee":1}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(bad).is_err());
        let good = r#"{"network":"l.csv","demand":"d.csv","model":"mnl-sue","dispersion":1}"#;
        assert_eq!(serde_json::from_str::<ScenarioConfig>(good).unwrap().model, ModelName::MnlSue);
    }

    #[test]
    fn hash_tracks_inputs() {
        let a = build(|_| {}).unwrap();
        let b = build(|_| {}).unwrap();
        let c = build(|c| c.b = Some(2.0)).unwrap();
        assert_eq!(a.input_hash(), b.input_hash());
        assert_ne!(a.input_hash(), c.input_hash());
    }
}
