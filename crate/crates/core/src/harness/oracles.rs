//! Independent numerical checks of the closed forms and the solver.

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};
use statrs::function::gamma::gamma;
use statrs::statistics::Distribution as _;

use crate::choice::{
    binomial_standard_error, erum_choice_frequencies_with_workers, eunit_prob, eunit_variance, mnw_variance,
    sensitivity, ExpUniform, SensitivityModel,
};
use crate::error::Result;
use crate::network::{load_flows, Link, Network, OdPair, RouteSet};
use crate::scenario::{ModelName, ModelSpec, Scenario};
use crate::solver::{
    eunit_gradient, eunit_objective, kkt_residual, solve_due, solve_eunit_sue, solve_inner_lower_bound,
    EUnitSueSpec, InitMode, SolverOptions, StepRule,
};

use super::fixtures::{NGUYEN_DUPUIS, THREE_ROUTE};
use super::report::{CheckKind, Report};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Random instances for the closed-form versus simulation battery.
    pub erum_instances: usize,
    pub erum_draws: u64,
    /// Draws for the single-distribution Monte-Carlo checks.
    pub moment_draws: usize,
    pub workers: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            erum_instances: 200,
            erum_draws: 1_000_000,
            moment_draws: 1_000_000,
            workers: 1,
        }
    }
}

/// Runs every oracle battery with the default sizes.
pub fn run_oracle_suites(seed: u64) -> Result<Report> {
    run_oracle_suites_with(seed, &OracleConfig::default())
}

pub fn run_oracle_suites_with(seed: u64, cfg: &OracleConfig) -> Result<Report> {
    let mut report = Report::new("oracles");
    report.seed = Some(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    erum_battery(&mut report, &mut rng, seed, cfg)?;
    moment_battery(&mut report, &mut rng, cfg)?;
    inner_root_battery(&mut report, &mut rng)?;
    gradient_battery(&mut report, &mut rng)?;
    convex_battery(&mut report, &mut rng)?;
    fixture_battery(&mut report)?;
    Ok(report)
}

fn erum_battery(report: &mut Report, rng: &mut ChaCha8Rng, seed: u64, cfg: &OracleConfig) -> Result<()> {
    let n = cfg.erum_draws;
    let freq = erum_choice_frequencies_with_workers(&[3.0, 1.0], n, seed, cfg.workers)?;
    let dev = max_se_multiple(freq.probs(), &[0.75, 0.25], n);
    report.push(
        "erum weights (3, 1)",
        CheckKind::Statistical,
        dev <= 3.0,
        format!("frequencies {:?}, worst deviation {dev:.2} SE", freq.probs()),
    );

    let mut worst = 0.0f64;
    let mut failures = 0u64;
    let mut comparisons = 0u64;
    for i in 0..cfg.erum_instances {
        let routes = rng.gen_range(2..=6);
        let lower = rng.gen_range(-5.0..20.0);
        let upper = lower + rng.gen_range(0.5..30.0);
        let times: Vec<f64> = (0..routes)
            .map(|_| lower + (upper - lower) * rng.gen_range(0.02..0.98))
            .collect();
        let closed = eunit_prob(&times, lower, upper)?;
        let weights: Vec<f64> = times.iter().map(|g| (upper - g) / (g - lower)).collect();
        let sim = erum_choice_frequencies_with_workers(&weights, n, seed.wrapping_add(1 + i as u64), cfg.workers)?;
        for (f, p) in sim.probs().iter().zip(closed.probs()) {
            let d = max_se_multiple(&[*f], &[*p], n);
            worst = worst.max(d);
            comparisons += 1;
            if d > 3.0 {
                failures += 1;
            }
        }
    }
    report.push(
        "eunit closed form vs erum simulation",
        CheckKind::Statistical,
        failures == 0,
        format!(
            "{} instances, {n} draws each: {failures} of {comparisons} route frequencies outside 3 SE, worst {worst:.2} SE",
            cfg.erum_instances
        ),
    );
    // Each comparison exceeds 3 SE with probability about 0.0027 even when
    // the closed form is exact, so a few exceedances are expected.
    let null = Binomial::new(2.0 * Normal::new(0.0, 1.0).expect("unit normal").cdf(-3.0), comparisons)
        .expect("valid binomial");
    let tail = if failures == 0 { 1.0 } else { null.sf(failures - 1) };
    report.track(
        "erum exceedance count consistent with sampling noise",
        CheckKind::Statistical,
        tail >= 0.01,
        format!("{failures} exceedances, expected {:.2}, P(X >= {failures}) = {tail:.3}", null.mean().unwrap_or(f64::NAN)),
    );
    Ok(())
}

fn max_se_multiple(freq: &[f64], p: &[f64], n: u64) -> f64 {
    freq.iter()
        .zip(p)
        .map(|(f, p)| {
            let se = binomial_standard_error(*p, n);
            if se > 0.0 {
                (f - p).abs() / se
            } else if f == p {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn sample_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, m2 * n / (n - 1.0), m4)
}

fn moment_battery(report: &mut Report, rng: &mut ChaCha8Rng, cfg: &OracleConfig) -> Result<()> {
    let n = cfg.moment_draws;
    let uniforms: Vec<f64> = (0..n).map(|_| Open01.sample(&mut *rng)).collect();

    // Exp-uniform mean by inverse-CDF sampling.
    let d = ExpUniform::new(0.0, 4.0, 3.0)?;
    let xs: Vec<f64> = uniforms.iter().map(|u| d.quantile(*u)).collect::<Result<_>>()?;
    let (mean, var, _) = sample_moments(&xs);
    let se = (var / n as f64).sqrt();
    report.push(
        "exp-uniform mean (l 0, u 4, shape 3)",
        CheckKind::Statistical,
        (mean - d.mean()).abs() <= 3.0 * se,
        format!("sample mean {mean:.6}, closed form {:.6}, SE {se:.2e}", d.mean()),
    );

    // Weibull with mean 10, shape 2.5, by inverse CDF.
    let shape = 2.5;
    let scale = 10.0 / gamma(1.0 + 1.0 / shape);
    let ws: Vec<f64> = uniforms.iter().map(|u| scale * (-u.ln()).powf(1.0 / shape)).collect();
    let (_, var, m4) = sample_moments(&ws);
    let closed = mnw_variance(10.0, shape, 0.0)?;
    let se = ((m4 - var * var) / n as f64).sqrt();
    report.push(
        "mnw variance (g 10, shape 2.5)",
        CheckKind::Statistical,
        (var - closed).abs() <= 3.0 * se,
        format!("sample variance {var:.6}, closed form {closed:.6}, SE {se:.2e}"),
    );

    // eUnit variance at g = 2 in (0, 10) against sampling at shape 0.25.
    let d = ExpUniform::new(0.0, 10.0, 0.25)?;
    let xs: Vec<f64> = uniforms.iter().map(|u| d.quantile(*u)).collect::<Result<_>>()?;
    let (_, var, m4) = sample_moments(&xs);
    let closed = eunit_variance(2.0, 0.0, 10.0)?;
    let se = ((m4 - var * var) / n as f64).sqrt();
    report.push(
        "eunit variance (g 2, l 0, u 10)",
        CheckKind::Statistical,
        (var - closed).abs() <= 3.0 * se && (closed - 64.0 / 9.0).abs() <= 1e-12,
        format!("sample variance {var:.6}, closed form {closed:.6}, SE {se:.2e}"),
    );

    // -ln U against Exponential(1), Kolmogorov-Smirnov at the 1% level.
    let mut e: Vec<f64> = uniforms.iter().map(|u| -u.ln()).collect();
    e.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let stat = e
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (-x).exp();
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / nf.sqrt();
    report.push(
        "-ln U is Exponential(1) (KS, 1%)",
        CheckKind::Statistical,
        stat < critical,
        format!("D = {stat:.3e}, critical {critical:.3e}"),
    );

    let (l, u) = (0.0, 10.0);
    let b = u - l;
    let mid = eunit_variance(5.0, l, u)?;
    let near: Vec<f64> = [l + 1e-6 * b, u - 1e-6 * b]
        .iter()
        .map(|g| eunit_variance(*g, l, u))
        .collect::<Result<_>>()?;
    report.push(
        "eunit variance at midpoint and near bounds",
        CheckKind::Exact,
        (mid - b * b / 12.0).abs() <= 1e-12 && near.iter().all(|v| *v < 1e-4 * b * b),
        format!("midpoint {mid:.12}, near bounds {near:?}"),
    );
    let s = |t| sensitivity(SensitivityModel::EUnit { lower: l, upper: u }, t);
    let (s_mid, s_lo, s_hi) = (s(5.0)?, s(5.0 - 1e-3)?, s(5.0 + 1e-3)?);
    report.push(
        "eunit sensitivity zero at midpoint, sign change",
        CheckKind::Exact,
        s_mid.abs() <= 1e-12 && s_lo > 0.0 && s_hi < 0.0,
        format!("S(mid) {s_mid:e}, below {s_lo:e}, above {s_hi:e}"),
    );

    // Sweep one route's time against a fixed route off the midpoint.
    let (l, u, g2) = (0.0, 10.0, 3.0);
    let p1 = |g1: f64| eunit_prob(&[g1, g2], l, u).map(|p| p[0]);
    let h = 1e-6;
    let slope = |g: f64| -> Result<f64> { Ok((p1(g + h)? - p1(g - h)?) / (2.0 * h)) };
    let (near_l, near_u) = (slope(l + 0.5)?, slope(u - 0.5)?);
    report.push(
        "eunit probability curve asymmetric in the bounds",
        CheckKind::Exact,
        (near_l.abs() - near_u.abs()).abs() > 1e-3,
        format!("dP/dg at l + 0.5: {near_l:.6}, at u - 0.5: {near_u:.6}"),
    );
    Ok(())
}

fn bisect_lower_bound(times: &[f64], b: f64, q: f64) -> f64 {
    let demand = |l: f64| times.iter().map(|g| ((l + b - g).max(0.0)) / (g - l)).sum::<f64>();
    let m = times.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (m - b, m);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if demand(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn inner_root_battery(report: &mut Report, rng: &mut ChaCha8Rng) -> Result<()> {
    let exact = (25.0 - 73f64.sqrt()) / 6.0;
    let got = solve_inner_lower_bound(&[5.0, 6.0], 4.0, 1.0, 1e-12)?;
    let bis = bisect_lower_bound(&[5.0, 6.0], 4.0, 1.0);
    report.push(
        "inner bound g (5, 6), b 4, q 1",
        CheckKind::Exact,
        (got - exact).abs() <= 1e-10 && (bis - exact).abs() <= 1e-10,
        format!("solver {got:.15}, quadratic {exact:.15}, bisection {bis:.15}"),
    );
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g: f64 = rng.gen_range(0.5..100.0);
        let b = rng.gen_range(0.01..50.0);
        let q = rng.gen_range(0.01..1000.0);
        let l = solve_inner_lower_bound(&[g], b, q, 1e-12)?;
        worst = worst.max((l - (g - b / (q + 1.0))).abs());
    }
    report.push(
        "single-route closed form",
        CheckKind::Exact,
        worst <= 1e-12,
        format!("100 cases, worst error {worst:.3e}"),
    );
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..30.0)).collect();
        let b = rng.gen_range(0.1..20.0);
        let q = rng.gen_range(0.1..500.0);
        let l = solve_inner_lower_bound(&times, b, q, 1e-12)?;
        let scale = times.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        worst = worst.max((l - bisect_lower_bound(&times, b, q)).abs() / scale);
    }
    report.push(
        "inner bound vs bisection, random instances",
        CheckKind::Exact,
        worst <= 1e-10,
        format!("100 cases, worst relative difference {worst:.3e}"),
    );
    Ok(())
}

/// Parallel links between nodes 1 and 2 carrying one OD pair.
fn random_parallel(rng: &mut ChaCha8Rng, routes: usize, linear: bool) -> Result<(Network<f64>, RouteSet<f64>)> {
    let links = (1..=routes)
        .map(|id| {
            let fftt = rng.gen_range(1.0..10.0);
            let alpha = if linear { rng.gen_range(0.1..1.0) } else { 0.0 };
            Link::with_bpr(id, 1, 2, fftt, rng.gen_range(5.0..50.0), alpha, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let net = Network::new(links)?;
    let q = rng.gen_range(0.5..50.0);
    let rs = RouteSet::new(&net, vec![(OdPair::new(1, 2, q)?, (1..=routes).map(|a| vec![a]).collect())])?;
    Ok((net, rs))
}

fn gradient_battery(report: &mut Report, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let routes = rng.gen_range(1..=4);
        let (net, rs) = random_parallel(rng, routes, true)?;
        let b = rng.gen_range(0.1..20.0);
        let spec = EUnitSueSpec::uniform(&net, &rs, b, SolverOptions::default())?;
        let f: Vec<f64> = (0..routes).map(|_| rng.gen_range(0.0..30.0)).collect();
        let grad = eunit_gradient(&load_flows(&net, &rs, &f)?, &spec)?;
        for r in 0..routes {
            let h = 1e-5 * (1.0 + f[r]);
            let mut up = f.clone();
            let mut down = f.clone();
            up[r] += h;
            down[r] = (down[r] - h).max(0.0);
            let width = up[r] - down[r];
            let zu = eunit_objective(&load_flows(&net, &rs, &up)?, &spec)?.total;
            let zd = eunit_objective(&load_flows(&net, &rs, &down)?, &spec)?.total;
            let fd = (zu - zd) / width;
            worst = worst.max((fd - grad[r]).abs() / grad[r].abs().max(1.0));
        }
    }
    report.push(
        "gradient vs central differences",
        CheckKind::Exact,
        worst <= 1e-6,
        format!("100 random states, worst relative error {worst:.3e}"),
    );
    Ok(())
}

/// Euclidean projection onto `{x >= 0, sum x = q}`.
fn project_simplex(y: &[f64], q: f64) -> Vec<f64> {
    let mut s = y.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, v) in s.iter().enumerate() {
        cum += v;
        let t = (cum - q) / (i + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Projected gradient with backtracking on the full objective.
fn projected_gradient(spec: &EUnitSueSpec<'_, f64>, q: f64, n: usize) -> Result<Vec<f64>> {
    let (net, rs) = (spec.network(), spec.route_set());
    let mut x = vec![q / n as f64; n];
    let mut step = 1.0;
    for _ in 0..200_000 {
        let st = load_flows(net, rs, &x)?;
        let z = eunit_objective(&st, spec)?.total;
        let g = eunit_gradient(&st, spec)?;
        let mut moved = false;
        while step > 1e-14 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - step * d).collect();
            let cand = project_simplex(&y, q);
            let dx: Vec<f64> = cand.iter().zip(&x).map(|(c, a)| c - a).collect();
            let zc = eunit_objective(&load_flows(net, rs, &cand)?, spec)?.total;
            let lin: f64 = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
            let sq: f64 = dx.iter().map(|d| d * d).sum();
            if zc <= z + lin + sq / (2.0 * step) {
                let done = sq.sqrt() <= 1e-14 * q.max(1.0);
                x = cand;
                moved = !done;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(x)
}

fn convex_battery(report: &mut Report, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst = 0.0f64;
    let instances = 24;
    for i in 0..instances {
        let routes = 1 + i % 3;
        let (net, rs) = random_parallel(rng, routes, i % 2 == 1)?;
        let b = rng.gen_range(0.2..20.0);
        let opts = SolverOptions {
            step: StepRule::Armijo,
            kkt_tolerance: 1e-12,
            ..Default::default()
        };
        let spec = EUnitSueSpec::uniform(&net, &rs, b, opts)?;
        let sol = solve_eunit_sue(&spec)?;
        let oracle = projected_gradient(&spec, rs.ods()[0].pair.demand, routes)?;
        for (a, o) in sol.route_flows().iter().zip(&oracle) {
            worst = worst.max((a - o).abs());
        }
    }
    report.push(
        "solver vs projected-gradient minimization",
        CheckKind::Exact,
        worst <= 1e-6,
        format!("{instances} instances (1-3 routes, constant or linear costs), worst flow difference {worst:.3e}"),
    );
    Ok(())
}

fn fixture_scenarios() -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (fx, b) in [(THREE_ROUTE, 1.0), (THREE_ROUTE, 10.0), (NGUYEN_DUPUIS, 10.0)] {
        let mut cfg = fx.config(ModelName::EUnit);
        cfg.b = Some(b);
        cfg.solver.step = Some("armijo".into());
        cfg.solver.max_iterations = Some(100_000);
        out.push(fx.scenario(cfg)?);
    }
    Ok(out)
}

fn fixture_battery(report: &mut Report) -> Result<()> {
    for s in fixture_scenarios()? {
        let ModelSpec::EUnit { bound_ranges } = &s.model else {
            continue;
        };
        let tag = format!("{} b {}", s.name, bound_ranges[0]);
        let spec = EUnitSueSpec::new(&s.network, &s.route_set, bound_ranges.clone(), s.options.clone())?;
        let sol = solve_eunit_sue(&spec)?;
        let mut trichotomy = true;
        for (k, bound) in sol.bounds.per_od.iter().enumerate() {
            let Some(bd) = bound else { continue };
            trichotomy &= ((bd.upper - bd.lower) - bound_ranges[k]).abs() <= 1e-12 * bd.upper.abs().max(1.0);
            for i in s.route_set.range(k) {
                let (f, g) = (sol.flows.route_flows[i], sol.flows.route_times[i]);
                trichotomy &= if f > 0.0 { bd.lower < g && g < bd.upper } else { g >= bd.upper };
            }
        }
        let kkt = kkt_residual(&sol.flows, &sol.bounds, &spec);
        report.push(
            format!("{tag}: KKT certificate and bound trichotomy"),
            CheckKind::Exact,
            sol.converged && kkt <= 1e-6 && trichotomy,
            format!("converged {}, residual {kkt:.3e}, trichotomy {trichotomy}", sol.converged),
        );

        let mut flows = Vec::new();
        for seed in 0..10 {
            let opts = SolverOptions {
                init: InitMode::Random,
                seed,
                ..s.options.clone()
            };
            let sp = EUnitSueSpec::new(&s.network, &s.route_set, bound_ranges.clone(), opts)?;
            flows.push(solve_eunit_sue(&sp)?.flows.route_flows);
        }
        let mut dev = 0.0f64;
        for a in &flows {
            for b in &flows {
                for (x, y) in a.iter().zip(b) {
                    dev = dev.max((x - y).abs() / x.abs().max(y.abs()).max(1e-9));
                }
            }
        }
        report.push(
            format!("{tag}: ten random starts agree"),
            CheckKind::Exact,
            dev <= 1e-5,
            format!("max pairwise relative deviation {dev:.3e}"),
        );

        let due = solve_due(&s.network, &s.route_set, &s.options)?;
        let small = EUnitSueSpec::new(&s.network, &s.route_set, vec![1e-3; bound_ranges.len()], s.options.clone())?;
        let near = solve_eunit_sue(&small)?;
        let rel = near
            .link_flows()
            .iter()
            .zip(due.link_flows())
            .map(|(a, b)| if *b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() })
            .fold(0.0, f64::max);
        report.push(
            format!("{tag}: b = 1e-3 approaches DUE"),
            CheckKind::Exact,
            rel <= 1e-2,
            format!("max relative link-flow difference {rel:.3e}"),
        );
    }
    Ok(())
}
