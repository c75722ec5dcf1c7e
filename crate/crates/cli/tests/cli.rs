use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eunit-sue")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_two_route(dir: &Path) {
    fs::write(dir.join("links.csv"), "from,to,fftt,capacity,alpha,beta\n1,2,5,10,0,\n1,2,6,10,0,\n").unwrap();
    fs::write(dir.join("demand.csv"), "origin,destination,demand\n1,2,1\n").unwrap();
}

#[test]
fn validate_nguyen_dupuis_fixture() {
    let out = run(&["validate", "--fixture", "nguyen-dupuis", "--model", "eunit", "--b", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["solve", "--no-such-flag"]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn invalid_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_two_route(dir.path());
    let net = dir.path().join("links.csv");
    let dem = dir.path().join("demand.csv");
    let out = run(&["solve", "--network", net.to_str().unwrap(), "--demand", dem.to_str().unwrap(), "--model", "eunit"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn iteration_cap_exits_with_non_convergence() {
    let out = run(&["solve", "--fixture", "three-route", "--model", "eunit", "--b", "10", "--max-iter", "1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    write_two_route(dir.path());
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let out = run(&["solve", "--network", &p("links.csv"), "--demand", &p("demand.csv"), "--model", "eunit", "--b", "4", "--step", "armijo", "--out", &p("out")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let routes = fs::read_to_string(dir.path().join("out/routes.csv")).unwrap();
    assert!(routes.contains(",0.772002,"), "{routes}");
    for f in ["links.csv", "bounds.csv", "trace.csv", "summary.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn sweep_over_b_flags_zero_as_due() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep", "--fixture", "three-route", "--model", "eunit", "--param", "b", "--from", "0", "--to", "10", "--steps", "11",
        "--step", "armijo", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let index = fs::read_to_string(out_dir.join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    let model_col = index.lines().next().unwrap().split(',').position(|c| c == "model").unwrap();
    assert_eq!(rows[0].split(',').nth(model_col), Some("due"));
    assert!(rows[1..].iter().all(|r| r.split(',').nth(model_col) == Some("eunit")));
}

#[test]
fn curves_drop_the_longest_route_beyond_the_upper_bound() {
    let out = run(&["curves"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|c| *c == name).unwrap();
    let (t3, p3) = (col("time_3"), col("eunit_3"));
    let mut beyond = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let time: f64 = cells[t3].parse().unwrap();
        let prob: f64 = cells[p3].parse().unwrap();
        if time > 29.75 {
            beyond += 1;
            assert_eq!(prob, 0.0, "{line}");
        } else if time < 29.7 {
            assert!(prob > 0.0, "{line}");
        }
    }
    assert!(beyond > 0);
}

#[test]
fn compare_writes_joined_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let out = run(&[
        "compare", "--fixture", "three-route", "--model", "eunit", "--b", "10", "--theta", "0.1", "--rho", "10", "--step",
        "armijo", "--tol", "1e-6", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(entries.iter().any(|e| e == "eunit") && entries.iter().any(|e| e == "bsue"), "{entries:?}");
    let csv = entries.iter().find(|e| e.ends_with(".csv")).expect("joined table");
    let table = fs::read_to_string(out_dir.join(csv)).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
}
