use std::fs;
use std::path::Path;

use eunit_sue::harness::{run_oracle_suites_with, OracleConfig};
use eunit_sue::scenario::{load_scenario, write_results, ModelSpec, ResultBundle, RESULT_FILES};
use eunit_sue::solver::StepRule;

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Two parallel constant-time links (5 and 6), one unit of demand.
fn two_route(dir: &Path, extra: &str) -> std::path::PathBuf {
    write(dir, "links.csv", "from,to,fftt,capacity,alpha,beta\n1,2,5,10,0,\n1,2,6,10,0,\n");
    write(dir, "demand.csv", "origin,destination,demand\n1,2,1\n");
    let path = dir.join("scenario.json");
    write(
        dir,
        "scenario.json",
        &format!(r#"{{"network": "links.csv", "demand": "demand.csv", "model": "eunit"{extra}}}"#),
    );
    path
}

#[test]
fn minimal_scenario_takes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let s = load_scenario(two_route(dir.path(), r#", "b": 1"#)).unwrap();
    assert_eq!(s.network.links()[1].alpha, 0.0);
    assert_eq!(s.network.links()[1].beta, 4.0);
    assert_eq!(s.options.step, StepRule::Msa);
    assert_eq!(s.route_set.route_count(), 2);
    assert!(matches!(s.model, ModelSpec::EUnit { ref bound_ranges } if bound_ranges == &[1.0]));
    assert!(s.notes.is_empty());
}

#[test]
fn default_bpr_parameters_fill_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_route(dir.path(), r#", "b": 1"#);
    write(dir.path(), "links.csv", "from,to,fftt,capacity,alpha,beta\n1,2,5,10,,\n1,2,6,10,,\n");
    let s = load_scenario(path).unwrap();
    assert_eq!(s.network.links()[0].alpha, 0.15);
    assert_eq!(s.network.links()[0].beta, 4.0);
}

#[test]
fn zero_bound_range_is_solved_as_due() {
    let dir = tempfile::tempdir().unwrap();
    let s = load_scenario(two_route(dir.path(), r#", "b": 0"#)).unwrap();
    assert_eq!(s.model, ModelSpec::Due);
    assert!(s.notes.iter().any(|n| n.contains("DUE")), "{:?}", s.notes);
}

#[test]
fn inverted_bounds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scenario(two_route(dir.path(), r#", "lower": 5, "upper": 5"#)).unwrap_err();
    assert!(err.to_string().contains("u > l"), "{err}");
}

#[test]
fn missing_parameter_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scenario(two_route(dir.path(), "")).unwrap_err();
    assert!(err.to_string().contains('b'), "{err}");
    let err = load_scenario(dir.path().join("absent.json")).unwrap_err();
    assert!(err.to_string().contains("absent.json"), "{err}");
}

#[test]
fn empty_network_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_route(dir.path(), r#", "b": 1, "output": "out""#);
    write(dir.path(), "links.csv", "from,to,fftt,capacity,alpha,beta\n");
    assert!(load_scenario(path).is_err());
    assert!(!dir.path().join("out").exists());
}

fn solve_into(scenario: &Path, out: &Path) -> Vec<Vec<u8>> {
    let s = load_scenario(scenario).unwrap();
    let sol = s.solve().unwrap();
    assert!(sol.converged);
    let bundle = ResultBundle { scenario: &s, solution: &sol, wall_time: None };
    write_results(&bundle, out).unwrap();
    RESULT_FILES.iter().map(|f| fs::read(out.join(f)).unwrap()).collect()
}

#[test]
fn two_route_results_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_route(dir.path(), r#", "b": 4, "solver": {"step": "armijo"}"#);
    let files = solve_into(&path, &dir.path().join("a"));
    let routes = String::from_utf8(files[0].clone()).unwrap();
    let lines: Vec<&str> = routes.lines().collect();
    assert_eq!(lines[0], "origin,destination,route_id,link_ids,flow,time,probability");
    // l solves 3l^2 - 25l + 46 = 0 on (2, 5); f_r = (l + 4 - g_r) / (g_r - l).
    let l = (25.0 - 73f64.sqrt()) / 6.0;
    for (line, g) in lines[1..].iter().zip([5.0, 6.0]) {
        let flow: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((flow - (l + 4.0 - g) / (g - l)).abs() <= 1e-6, "{line}");
    }
    assert!(lines[1].contains(",0.772002,"), "{}", lines[1]);
    assert!(lines[2].contains(",0.227998,"), "{}", lines[2]);
    assert!(!routes.contains('\r'));
}

#[test]
fn rerun_reproduces_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = two_route(dir.path(), r#", "b": 4, "solver": {"init": "random"}, "seed": 9"#);
    let a = solve_into(&path, &dir.path().join("a"));
    let b = solve_into(&path, &dir.path().join("b"));
    assert_eq!(a, b);
}

#[test]
fn oracle_reports_are_deterministic_given_the_seed() {
    let cfg = OracleConfig { erum_instances: 4, erum_draws: 20_000, moment_draws: 20_000, workers: 1 };
    let a = run_oracle_suites_with(5, &cfg).unwrap();
    let b = run_oracle_suites_with(5, &OracleConfig { workers: 2, ..cfg.clone() }).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
