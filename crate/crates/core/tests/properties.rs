use std::path::Path;

use proptest::prelude::*;

use eunit_sue::choice::eunit_prob;
use eunit_sue::network::{beckmann_link_integral, bpr_time, load_flows, Link, LinkId, Network, OdPair, RouteSet};
use eunit_sue::scenario::{parse_demand, parse_links, parse_routes, demand_csv, links_csv, routes_csv};
use eunit_sue::solver::{eunit_objective, solve_eunit_sue, EUnitSueSpec, SolverOptions, StepRule};

/// Link parameters `(fftt, capacity, alpha, beta)`.
fn link_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.5f64..20.0, 5.0f64..200.0, 0.0f64..1.0, prop::sample::select(vec![1.0, 2.0, 4.0]))
}

/// One OD pair (1 -> 3) over a shared link 1 -> 2 and 1-4 private links
/// 2 -> 3.
fn shared_instance() -> impl Strategy<Value = (Network<f64>, RouteSet<f64>)> {
    (link_params(), prop::collection::vec(link_params(), 1..=4), 0.5f64..80.0).prop_map(|(shared, private, q)| {
        let mut links = vec![Link::with_bpr(1, 1, 2, shared.0, shared.1, shared.2, shared.3).unwrap()];
        for (i, p) in private.iter().enumerate() {
            links.push(Link::with_bpr(i + 2, 2, 3, p.0, p.1, p.2, p.3).unwrap());
        }
        let net = Network::new(links).unwrap();
        let routes: Vec<Vec<LinkId>> = (0..private.len()).map(|i| vec![1, i + 2]).collect();
        let rs = RouteSet::new(&net, vec![(OdPair::new(1, 3, q).unwrap(), routes)]).unwrap();
        (net, rs)
    })
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn feasible(rs: &RouteSet<f64>, flows: &[f64]) -> bool {
    rs.ods().iter().enumerate().all(|(k, od)| {
        let s: f64 = flows[rs.range(k)].iter().sum();
        flows[rs.range(k)].iter().all(|f| *f >= 0.0) && (s - od.pair.demand).abs() <= 1e-9 * od.pair.demand.max(1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bpr_time_strictly_increasing(p in link_params(), v1 in 0.0f64..500.0, dv in 1e-3f64..500.0) {
        let (fftt, cap, alpha, beta) = p;
        let link = Link::with_bpr(1, 1, 2, fftt, cap, alpha.max(1e-3), beta).unwrap();
        prop_assert!(bpr_time(&link, v1 + dv).unwrap() > bpr_time(&link, v1).unwrap());
    }

    #[test]
    fn link_integral_matches_quadrature(p in link_params(), v in 0.0f64..400.0) {
        let (fftt, cap, alpha, beta) = p;
        let link = Link::with_bpr(1, 1, 2, fftt, cap, alpha, beta).unwrap();
        let exact = beckmann_link_integral(&link, v).unwrap();
        // Simpson is exact for cubics; 2000 panels keep quartics far below 1e-9.
        let quad = simpson(|x| bpr_time(&link, x).unwrap(), 0.0, v, 2000);
        prop_assert!((exact - quad).abs() <= 1e-9 * exact.abs().max(1e-12), "{exact} vs {quad}");
    }

    #[test]
    fn loading_is_linear_and_route_times_add_up(
        inst in shared_instance(),
        raw in prop::collection::vec(0.0f64..50.0, 4),
    ) {
        let (net, rs) = inst;
        let f: Vec<f64> = raw[..rs.route_count()].to_vec();
        let twice: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        let a = load_flows(&net, &rs, &f).unwrap();
        let b = load_flows(&net, &rs, &twice).unwrap();
        for (x, y) in a.link_flows.iter().zip(&b.link_flows) {
            prop_assert_eq!(2.0 * x, *y);
        }
        for (i, (_, route)) in rs.iter().enumerate() {
            let sum: f64 = route.link_ids().iter().map(|&l| a.link_times[l - 1]).sum();
            prop_assert_eq!(sum, a.route_times[i]);
        }
    }

    #[test]
    fn lowering_a_route_time_raises_its_probability(
        l in -10.0f64..10.0, b in 0.5f64..30.0, t1 in 0.02f64..0.98, t2 in 0.02f64..0.98, cut in 0.01f64..0.99,
    ) {
        let u = l + b;
        let g1 = l + b * t1;
        let g2 = l + b * t2;
        let lower = l + (g1 - l) * cut;
        let before = eunit_prob(&[g1, g2], l, u).unwrap()[0];
        let after = eunit_prob(&[lower, g2], l, u).unwrap()[0];
        prop_assert!(after > before);
    }

    #[test]
    fn objective_convex_along_simplex_segments(
        inst in shared_instance(),
        b in 0.1f64..20.0,
        wa in prop::collection::vec(0.01f64..1.0, 4),
        wb in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        let (net, rs) = inst;
        let n = rs.route_count();
        let q = rs.ods()[0].pair.demand;
        let point = |w: &[f64]| {
            let s: f64 = w[..n].iter().sum();
            w[..n].iter().map(|x| q * x / s).collect::<Vec<f64>>()
        };
        let (x, y) = (point(&wa), point(&wb));
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, c)| 0.5 * (a + c)).collect();
        let spec = EUnitSueSpec::uniform(&net, &rs, b, SolverOptions::default()).unwrap();
        let z = |f: &[f64]| eunit_objective(&load_flows(&net, &rs, f).unwrap(), &spec).unwrap().total;
        let (zx, zy, zm) = (z(&x), z(&y), z(&mid));
        prop_assert!(zm <= 0.5 * (zx + zy) + 1e-9 * (zx.abs() + zy.abs()));
        // The log term's Hessian diagonal b/(f+1)^2 is positive.
        for f in &mid {
            prop_assert!(b / ((f + 1.0) * (f + 1.0)) > 0.0);
        }
    }

    #[test]
    fn every_iterate_is_feasible(inst in shared_instance(), b in 0.1f64..20.0, stop in 1usize..40, armijo in any::<bool>()) {
        let (net, rs) = inst;
        let opts = SolverOptions {
            max_iterations: stop,
            step: if armijo { StepRule::Armijo } else { StepRule::Msa },
            ..Default::default()
        };
        let sol = solve_eunit_sue(&EUnitSueSpec::uniform(&net, &rs, b, opts).unwrap()).unwrap();
        prop_assert!(feasible(&rs, sol.route_flows()));
    }

    #[test]
    fn converged_flows_reproduce_closed_form(inst in shared_instance(), b in 0.1f64..20.0) {
        let (net, rs) = inst;
        let opts = SolverOptions { step: StepRule::Armijo, max_iterations: 100_000, ..Default::default() };
        let sol = solve_eunit_sue(&EUnitSueSpec::uniform(&net, &rs, b, opts).unwrap()).unwrap();
        prop_assert!(sol.converged);
        let bd = sol.bounds.per_od[0].unwrap();
        let p = eunit_prob(&sol.flows.route_times, bd.lower, bd.upper).unwrap();
        for (pr, f) in p.probs().iter().zip(sol.route_flows()) {
            prop_assert!((pr - f / rs.ods()[0].pair.demand).abs() <= 1e-6, "{pr} vs {} (residual {}, iterations {}, q {})", f / rs.ods()[0].pair.demand, sol.kkt_residual, sol.iterations, rs.ods()[0].pair.demand);
        }
    }

    #[test]
    fn armijo_objective_never_increases(inst in shared_instance(), b in 0.1f64..20.0) {
        let (net, rs) = inst;
        let opts = SolverOptions { step: StepRule::Armijo, max_iterations: 2_000, ..Default::default() };
        let sol = solve_eunit_sue(&EUnitSueSpec::uniform(&net, &rs, b, opts).unwrap()).unwrap();
        for w in sol.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-12 * w[0].objective.abs().max(1.0),
                "{} -> {}", w[0].objective, w[1].objective);
        }
    }

    #[test]
    fn route_table_round_trip(inst in shared_instance()) {
        let (net, rs) = inst;
        let path = Path::new("mem.csv");
        let net2 = parse_links(&links_csv(&net), path).unwrap();
        let pairs = parse_demand(&demand_csv(&rs), path).unwrap();
        let rs2 = parse_routes(&routes_csv(&rs), path, &net2, &pairs).unwrap();
        prop_assert_eq!(rs2, rs);
    }
}
