use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use eunit_sue::harness::{self, CurveConfig, Report};
use eunit_sue::scenario::{
    fmt6, join_ids, load_scenario, write_atomic, write_results, ModelName, ResultBundle, Scenario,
    ScenarioConfig, ScenarioInputs,
};
use eunit_sue::EquilibriumSolution;

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
/// A required harness check failed.
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "eunit-sue", version, about = "Bounded-perception stochastic user equilibrium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write its result files.
    Solve(SolveArgs),
    /// Solve a scenario over a range of one parameter.
    Sweep(SweepArgs),
    /// Choice probabilities of MNL, MNW, BC and eUnit against a common time shift.
    Curves(CurvesArgs),
    /// Solve eUnit-SUE and BSUE on one scenario and join the route tables.
    Compare(SolveArgs),
    /// Parse and check a scenario without solving it.
    Validate(ScenarioArgs),
    /// Replication suites and oracle batteries.
    #[command(subcommand)]
    Harness(HarnessCommand),
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    /// Scenario file (JSON); flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in network: three-route or nguyen-dupuis.
    #[arg(long, conflicts_with_all = ["scenario", "network"])]
    fixture: Option<String>,
    /// Links table (from,to,fftt,capacity[,alpha,beta]).
    #[arg(long)]
    network: Option<PathBuf>,
    /// Demand table (origin,destination,demand).
    #[arg(long)]
    demand: Option<PathBuf>,
    /// Route table; routes are enumerated when absent.
    #[arg(long)]
    routes: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelName>,
    /// eUnit bound range (b = 0 solves DUE).
    #[arg(long)]
    b: Option<f64>,
    /// BC scale.
    #[arg(long)]
    theta: Option<f64>,
    /// BC threshold.
    #[arg(long)]
    rho: Option<f64>,
    /// MNL dispersion.
    #[arg(long)]
    dispersion: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance for the KKT residual, gap and flow change.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    step: Option<Step>,
    /// Seed for random initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Threads for the per-OD inner phase.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    Msa,
    Armijo,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    B,
    Theta,
    Rho,
    Dispersion,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "b")]
    param: Param,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    steps: usize,
    /// Output directory; one subdirectory per point plus index.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    /// Route time offsets added to x.
    #[arg(long, value_delimiter = ',', default_value = "5,0,10")]
    offsets: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    from: f64,
    #[arg(long, default_value_t = 25.0)]
    to: f64,
    #[arg(long, default_value_t = 201)]
    steps: usize,
    /// MNL dispersion.
    #[arg(long, default_value_t = 1.0)]
    dispersion: f64,
    #[arg(long, default_value_t = 2.5)]
    mnw_shape: f64,
    #[arg(long, default_value_t = 0.0)]
    mnw_location: f64,
    /// BC scale.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// BC threshold.
    #[arg(long, default_value_t = 25.0)]
    rho: f64,
    /// eUnit lower bound.
    #[arg(long, default_value_t = 4.75)]
    lower: f64,
    /// eUnit upper bound.
    #[arg(long, default_value_t = 29.75)]
    upper: f64,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HarnessCommand {
    /// Route exclusion and bound-range response on three parallel routes.
    ThreeRoute(HarnessOut),
    /// eUnit-SUE and BSUE route choice on the Nguyen-Dupuis network.
    NguyenDupuis {
        #[arg(long, default_value_t = 100.0)]
        demand: f64,
        #[command(flatten)]
        out: HarnessOut,
    },
    /// Monte-Carlo, finite-difference, convex and root-finding oracles.
    Oracles {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        out: HarnessOut,
    },
}

#[derive(Args)]
struct HarnessOut {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure that maps to the usage exit code.
struct Usage(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.into())
    }
}

type CmdResult = Result<u8, Usage>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a),
        Command::Compare(a) => compare(a),
        Command::Validate(a) => validate(a),
        Command::Harness(h) => run_harness(h),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

impl ScenarioArgs {
    /// Scenario config, table contents and the directory relative paths
    /// resolve against.
    fn resolve(&self) -> anyhow::Result<(ScenarioConfig, Option<ScenarioInputs>, PathBuf)> {
        let (mut cfg, inputs, base) = if let Some(path) = &self.scenario {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg: ScenarioConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, None, base)
        } else if let Some(name) = &self.fixture {
            let fx = harness::fixture(name).ok_or_else(|| {
                anyhow!(
                    "unknown fixture `{name}` (available: {})",
                    harness::FIXTURES.map(|f| f.name).join(", ")
                )
            })?;
            let cfg = fx.config(self.model.unwrap_or(ModelName::EUnit));
            (cfg, Some(fx.inputs()), PathBuf::from(fx.name))
        } else {
            let (Some(network), Some(demand)) = (&self.network, &self.demand) else {
                bail!("give --scenario, --fixture, or both --network and --demand");
            };
            let mut cfg = ScenarioConfig::new(network, demand, self.model.unwrap_or(ModelName::EUnit));
            cfg.routes = self.routes.clone();
            (cfg, None, PathBuf::new())
        };
        if self.scenario.is_some() {
            if let Some(p) = &self.network {
                cfg.network = p.clone();
            }
            if let Some(p) = &self.demand {
                cfg.demand = p.clone();
            }
            if self.routes.is_some() {
                cfg.routes = self.routes.clone();
            }
        }
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if self.b.is_some() {
            cfg.b = self.b;
            cfg.lower = None;
            cfg.upper = None;
        }
        cfg.theta = self.theta.or(cfg.theta);
        cfg.rho = self.rho.or(cfg.rho);
        cfg.dispersion = self.dispersion.or(cfg.dispersion);
        cfg.solver.max_iterations = self.max_iter.or(cfg.solver.max_iterations);
        if let Some(t) = self.tol {
            cfg.solver.kkt_tolerance = Some(t);
            cfg.solver.flow_tolerance = Some(t);
        }
        if let Some(s) = self.step {
            cfg.solver.step = Some(match s {
                Step::Msa => "msa".into(),
                Step::Armijo => "armijo".into(),
            });
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.solver.workers = self.workers.or(cfg.solver.workers);
        Ok((cfg, inputs, base))
    }

    fn build(&self, cfg: ScenarioConfig, inputs: Option<ScenarioInputs>, base: &Path) -> anyhow::Result<Scenario> {
        let inputs = match inputs {
            Some(i) => i,
            None => ScenarioInputs::read(&cfg, base)?,
        };
        Ok(Scenario::from_parts(cfg, inputs, base)?)
    }

    fn scenario(&self) -> anyhow::Result<Scenario> {
        if let (Some(path), true) = (&self.scenario, self.is_plain_file()) {
            return Ok(load_scenario(path)?);
        }
        let (cfg, inputs, base) = self.resolve()?;
        self.build(cfg, inputs, &base)
    }

    /// No flag overrides the scenario file.
    fn is_plain_file(&self) -> bool {
        self.scenario.is_some()
            && self.network.is_none()
            && self.demand.is_none()
            && self.routes.is_none()
            && self.model.is_none()
            && self.b.is_none()
            && self.theta.is_none()
            && self.rho.is_none()
            && self.dispersion.is_none()
            && self.max_iter.is_none()
            && self.tol.is_none()
            && self.step.is_none()
            && self.seed.is_none()
            && self.workers.is_none()
    }
}

fn report_warnings(scenario: &Scenario, sol: &EquilibriumSolution) {
    for n in &scenario.notes {
        eprintln!("note: {n}");
    }
    for w in &sol.warnings {
        warn!("{w}");
    }
}

fn solve(a: SolveArgs) -> CmdResult {
    let s = a.scenario.scenario()?;
    let sol = s.solve()?;
    report_warnings(&s, &sol);
    let bundle = ResultBundle {
        scenario: &s,
        solution: &sol,
        wall_time: None,
    };
    match a.out.as_ref().or(s.output.as_ref()) {
        Some(dir) => {
            write_results(&bundle, dir)?;
            eprintln!("wrote results to {}", dir.display());
        }
        None => print!("{}", bundle.summary_json()),
    }
    if !sol.converged {
        eprintln!("solver did not converge after {} iterations", sol.iterations);
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn sweep(a: SweepArgs) -> CmdResult {
    if a.steps == 0 || !a.from.is_finite() || !a.to.is_finite() {
        return Err(anyhow!("sweep needs --steps >= 1 and finite --from/--to").into());
    }
    let (base_cfg, inputs, base) = a.scenario.resolve()?;
    let name = match a.param {
        Param::B => "b",
        Param::Theta => "theta",
        Param::Rho => "rho",
        Param::Dispersion => "dispersion",
    };
    let mut index = format!("point,{name},model,objective,z1,z2,kkt_residual,iterations,converged,dir\n");
    let mut all_converged = true;
    for i in 0..a.steps {
        let v = if a.steps == 1 {
            a.from
        } else {
            a.from + (a.to - a.from) * i as f64 / (a.steps - 1) as f64
        };
        let mut cfg = base_cfg.clone();
        match a.param {
            Param::B => {
                cfg.b = Some(v);
                cfg.lower = None;
                cfg.upper = None;
                cfg.b_per_od.clear();
            }
            Param::Theta => cfg.theta = Some(v),
            Param::Rho => cfg.rho = Some(v),
            Param::Dispersion => cfg.dispersion = Some(v),
        }
        let s = a
            .scenario
            .build(cfg, inputs.clone(), &base)
            .with_context(|| format!("sweep point {name} = {v}"))?;
        let sol = s.solve()?;
        report_warnings(&s, &sol);
        all_converged &= sol.converged;
        let dir = format!("point_{i:03}");
        if let Some(out) = &a.out {
            let bundle = ResultBundle {
                scenario: &s,
                solution: &sol,
                wall_time: None,
            };
            write_results(&bundle, &out.join(&dir))?;
        }
        let _ = writeln!(
            index,
            "{i},{},{},{},{},{},{:.6e},{},{},{dir}",
            fmt6(v),
            s.model.name(),
            fmt6(sol.objective.total),
            fmt6(sol.objective.beckmann),
            fmt6(sol.objective.route_term),
            sol.kkt_residual,
            sol.iterations,
            sol.converged
        );
    }
    match &a.out {
        Some(out) => {
            // Written last so its presence marks a complete sweep.
            write_atomic(&out.join("index.csv"), index.as_bytes())?;
            eprintln!("wrote {} points to {}", a.steps, out.display());
        }
        None => print!("{index}"),
    }
    Ok(if all_converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn curves(a: CurvesArgs) -> CmdResult {
    let cfg = CurveConfig {
        offsets: a.offsets,
        x_from: a.from,
        x_to: a.to,
        steps: a.steps,
        mnl_dispersion: a.dispersion,
        mnw_shape: a.mnw_shape,
        mnw_location: a.mnw_location,
        bc_scale: a.theta,
        bc_threshold: a.rho,
        eunit_lower: a.lower,
        eunit_upper: a.upper,
    };
    let rows = harness::choice_curves(&cfg)?;
    let csv = harness::curves_csv(&rows);
    match &a.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn compare(a: SolveArgs) -> CmdResult {
    let (cfg, inputs, base) = a.scenario.resolve()?;
    let mut eu_cfg = cfg.clone();
    eu_cfg.model = ModelName::EUnit;
    let mut bs_cfg = cfg;
    bs_cfg.model = ModelName::Bsue;
    let eu_s = a.scenario.build(eu_cfg, inputs.clone(), &base).context("eunit scenario")?;
    let bs_s = a.scenario.build(bs_cfg, inputs, &base).context("bsue scenario")?;
    let eu = eu_s.solve()?;
    let bs = bs_s.solve()?;
    report_warnings(&eu_s, &eu);
    report_warnings(&bs_s, &bs);

    let mut table = String::from(
        "origin,destination,route_id,link_ids,eunit_flow,eunit_percent,eunit_time,bsue_flow,bsue_percent,bsue_time\n",
    );
    for (k, od) in eu_s.route_set.ods().iter().enumerate() {
        for (j, i) in eu_s.route_set.range(k).enumerate() {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{:.2},{},{},{:.2},{}",
                od.pair.origin,
                od.pair.destination,
                j + 1,
                join_ids(eu_s.route_set.route(i).link_ids()),
                fmt6(eu.flows.route_flows[i]),
                100.0 * eu.probabilities[i],
                fmt6(eu.flows.route_times[i]),
                fmt6(bs.flows.route_flows[i]),
                100.0 * bs.probabilities[i],
                fmt6(bs.flows.route_times[i]),
            );
        }
    }
    match a.out.as_ref().or(eu_s.output.as_ref()) {
        Some(dir) => {
            for (sub, s, sol) in [("eunit", &eu_s, &eu), ("bsue", &bs_s, &bs)] {
                let bundle = ResultBundle {
                    scenario: s,
                    solution: sol,
                    wall_time: None,
                };
                write_results(&bundle, &dir.join(sub))?;
            }
            write_atomic(&dir.join("compare.csv"), table.as_bytes())?;
            eprintln!("wrote comparison to {}", dir.display());
        }
        None => print!("{table}"),
    }
    Ok(if eu.converged && bs.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn validate(a: ScenarioArgs) -> CmdResult {
    let s = a.scenario()?;
    println!("scenario {}: ok", s.name);
    println!("model: {}", s.model.name());
    println!("links: {}", s.network.link_count());
    println!("od pairs: {}", s.route_set.od_count());
    println!("routes: {}", s.route_set.route_count());
    println!("input hash: {}", s.input_hash());
    for n in &s.notes {
        println!("note: {n}");
    }
    Ok(0)
}

fn emit_report(report: &Report, out: &HarnessOut) -> CmdResult {
    for c in &report.checks {
        let tag = match (c.passed, c.required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "MISS",
        };
        eprintln!("{tag} [{:?}] {}: {}", c.kind, c.name, c.detail);
    }
    let json = report.to_json();
    match &out.out {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn run_harness(h: HarnessCommand) -> CmdResult {
    match h {
        HarnessCommand::ThreeRoute(out) => emit_report(&harness::run_three_route_suite()?, &out),
        HarnessCommand::NguyenDupuis { demand, out } => emit_report(&harness::run_nguyen_dupuis_suite(demand)?, &out),
        HarnessCommand::Oracles { seed, workers, out } => {
            if workers == 0 {
                return Err(anyhow!("--workers must be at least 1").into());
            }
            let cfg = harness::OracleConfig {
                workers,
                ..Default::default()
            };
            emit_report(&harness::run_oracle_suites_with(seed, &cfg)?, &out)
        }
    }
}
