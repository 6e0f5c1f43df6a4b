use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qvi_cli::SolutionTable;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bench(n: usize) -> Value {
    json!({
        "spec_version": 1,
        "problem": {
            "regimes": [{"A": 0.2, "x": 0.0}, {"A": 0.3, "x": 1.0}],
            "gamma": 2.0, "rho": 0.04, "delta": 0.05, "pi": 0.0,
            "eta": "vanishing"
        },
        "grid": {"k_min": 0.01, "k_max": 6.0, "n": n},
        "sim": {"k0": 0.5, "i0": 1, "t_max": 60.0}
    })
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, cfg: &Value) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn qvi(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_qvi")).args(args).current_dir(self.dir.path()).output().unwrap()
    }

    fn cmd(&self, sub: &str, cfg: &Path, out: &Path) -> Output {
        self.qvi(&[sub, "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let r = Run::new();
    let good = r.config("good.json", &bench(101));
    assert_eq!(code(&r.qvi(&["validate", "--config", good.to_str().unwrap()])), 0);

    let mut bad = bench(101);
    bad["problem"]["eta"] = json!([[0.1, 0.2], [0.2, 0.0]]);
    let o = r.qvi(&["validate", "--config", r.config("bad.json", &bad).to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("diagonal cost nonzero for regime 1"), "{}", stderr(&o));

    fs::write(r.out("broken.json"), "{\"spec_version\": 1, ").unwrap();
    assert_eq!(code(&r.qvi(&["validate", "--config", "broken.json"])), 2);

    let mut unknown = bench(101);
    unknown["grid"]["h"] = json!(0.1);
    assert_eq!(code(&r.qvi(&["validate", "--config", r.config("u.json", &unknown).to_str().unwrap()])), 2);
    assert_eq!(code(&r.qvi(&["validate", "--config", "missing.json"])), 2);
}

#[test]
fn analytic_outputs() {
    let r = Run::new();
    let cfg = r.config("b.json", &bench(601));
    assert_eq!(code(&r.cmd("analytic", &cfg, &r.out("a"))), 0);
    let t = read_json(r.out("a/thresholds.json"));
    assert!((t["k"][0][1].as_f64().unwrap() - 1.752084).abs() < 1e-6);
    assert!((t["a"][0][1].as_f64().unwrap() - 2.329640).abs() < 1e-6);
    let csv = fs::read_to_string(r.out("a/value.csv")).unwrap();
    assert!(csv.starts_with("k,stay_1,stay_2,v,c_1,c_2\n"));
    assert_eq!(csv.lines().count(), 602);

    let mut three = bench(601);
    three["problem"]["regimes"] = json!([{"A": 0.2, "x": 0.0}, {"A": 0.3, "x": 1.0}, {"A": 0.4, "x": 2.0}]);
    three["grid"]["k_max"] = json!(10.0);
    assert_eq!(code(&r.cmd("analytic", &r.config("t.json", &three), &r.out("t"))), 0);
    let t = read_json(r.out("t/thresholds.json"));
    let s1 = t["regions"]["regimes"][0]["switch"].as_array().unwrap();
    assert_eq!(s1.len(), 2);

    let mut log = bench(601);
    log["problem"]["gamma"] = json!(1.0);
    let o = r.cmd("analytic", &r.config("l.json", &log), &r.out("l"));
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gamma"));
}

#[test]
fn analytic_warns_on_short_domain() {
    let r = Run::new();
    let mut cfg = bench(301);
    cfg["grid"]["k_max"] = json!(2.0);
    let o = r.cmd("analytic", &r.config("c.json", &cfg), &r.out("o"));
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning: k_max"));
}

#[test]
fn solve_outputs_are_deterministic_and_round_trip() {
    let r = Run::new();
    let cfg = r.config("b.json", &bench(801));
    assert_eq!(code(&r.cmd("solve", &cfg, &r.out("x"))), 0);
    assert_eq!(code(&r.cmd("solve", &cfg, &r.out("y"))), 0);
    for f in ["solution.csv", "regions.json", "diagnostics.json"] {
        assert_eq!(fs::read(r.out("x").join(f)).unwrap(), fs::read(r.out("y").join(f)).unwrap(), "{f}");
    }
    let d = read_json(r.out("x/diagnostics.json"));
    assert_eq!(d["converged"], json!(true));
    assert_eq!(d["mode"], json!("vanishing"));

    let text = fs::read_to_string(r.out("x/solution.csv")).unwrap();
    let table = SolutionTable::parse(&text).unwrap();
    let p = qvi_cli::parse_config(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let s = qvi_core::solver::solve_qvi(
        &p.problem.build(),
        &p.grid.build().unwrap(),
        &p.solver.build().unwrap(),
    )
    .unwrap();
    for (a, b) in table.values.iter().flatten().zip(s.values.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // the costless flip sits at the crossing of net outputs
    let regions = read_json(r.out("x/regions.json"));
    let lo = regions["regimes"][0]["switch"][0]["interval"]["lo"].as_f64().unwrap();
    assert!((lo - 2.5).abs() <= 5.99 / 800.0, "{lo}");
}

#[test]
fn doubling_costs_lowers_values() {
    let r = Run::new();
    let mut cheap = bench(601);
    cheap["problem"]["eta"] = json!(0.01);
    let mut dear = cheap.clone();
    dear["problem"]["eta"] = json!(0.02);
    assert_eq!(code(&r.cmd("solve", &r.config("c.json", &cheap), &r.out("c"))), 0);
    assert_eq!(code(&r.cmd("solve", &r.config("d.json", &dear), &r.out("d"))), 0);
    let a = SolutionTable::parse(&fs::read_to_string(r.out("c/solution.csv")).unwrap()).unwrap();
    let b = SolutionTable::parse(&fs::read_to_string(r.out("d/solution.csv")).unwrap()).unwrap();
    for (x, y) in a.values.iter().flatten().zip(b.values.iter().flatten()) {
        assert!(y <= x);
    }
}

#[test]
fn single_regime_has_no_switching() {
    let r = Run::new();
    let mut cfg = bench(301);
    cfg["problem"]["regimes"] = json!([{"A": 0.2, "x": 0.0}]);
    assert_eq!(code(&r.cmd("solve", &r.config("s.json", &cfg), &r.out("s"))), 0);
    let regions = read_json(r.out("s/regions.json"));
    assert_eq!(regions["regimes"][0]["switch"], json!([]));
}

#[test]
fn nonconvergence_still_writes_files() {
    let r = Run::new();
    let mut cfg = bench(301);
    cfg["solver"] = json!({"max_iter": 1});
    let o = r.cmd("solve", &r.config("s.json", &cfg), &r.out("s"));
    assert_eq!(code(&o), 3);
    assert_eq!(read_json(r.out("s/diagnostics.json"))["converged"], json!(false));
    assert_eq!(read_json(r.out("s/meta.json"))["exit_code"], json!(3));
}

#[test]
fn simulate_analytic_policy() {
    let r = Run::new();
    let mut cfg = bench(301);
    cfg["sim"]["t_max"] = json!(40.0);
    assert_eq!(code(&r.cmd("simulate", &r.config("b.json", &cfg), &r.out("s"))), 0);
    let ev = read_json(r.out("s/events.json"));
    let ev = ev.as_array().unwrap();
    assert_eq!(ev.len(), 1);
    assert!((ev[0]["time"].as_f64().unwrap() - 22.80).abs() < 0.01);
    let summary = read_json(r.out("s/summary.json"));
    assert!(summary["dpp"]["residual"].as_f64().unwrap() < 1e-3);
    assert!(summary["euler_residual"].as_f64().unwrap() < 1e-6);
    let prices = summary["prices"].as_array().unwrap();
    assert_eq!(prices.len(), 2);
    assert_eq!(prices[0]["rental_rate"], json!(0.2));
    assert_eq!(prices[1]["rental_rate"], json!(0.3));
    assert!(prices.iter().all(|p| p["wage"] == json!(0.0)));
    let traj = fs::read_to_string(r.out("s/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,k,c,regime,u_inst,U_cum\n"));

    cfg["sim"]["k0"] = json!(3.0);
    assert_eq!(code(&r.cmd("simulate", &r.config("k3.json", &cfg), &r.out("k3"))), 0);
    let ev = read_json(r.out("k3/events.json"));
    assert_eq!(ev[0]["time"], json!(0.0));
}

#[test]
fn simulate_from_solution_file() {
    let r = Run::new();
    let mut cfg = bench(601);
    cfg["problem"]["eta"] = json!(0.01);
    cfg["sim"]["policy"] = json!("solution_file");
    let path = r.config("c.json", &cfg);
    assert_eq!(code(&r.cmd("simulate", &path, &r.out("o"))), 1);
    assert_eq!(code(&r.cmd("solve", &path, &r.out("o"))), 0);
    assert_eq!(code(&r.cmd("simulate", &path, &r.out("o"))), 0);
    let ev = read_json(r.out("o/events.json"));
    let ev = ev.as_array().unwrap();
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0]["cost"], json!(0.01));
}

#[test]
fn compare_detects_a_wrong_reference() {
    let r = Run::new();
    let mut cfg = bench(401);
    let loose = json!({"value_rel_tol": 0.3, "threshold_cells": 1e9, "switch_time_rel_tol": 10.0});
    cfg["acceptance"] = loose.clone();
    assert_eq!(code(&r.cmd("compare", &r.config("ok.json", &cfg), &r.out("ok"))), 0);
    let right = read_json(r.out("ok/compare.json"))["sup_rel_error"].as_f64().unwrap();

    let mut reference = cfg["problem"].clone();
    reference["rho"] = json!(0.08);
    cfg["acceptance"]["reference"] = reference;
    let o = r.cmd("compare", &r.config("c.json", &cfg), &r.out("c"));
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("value_rel_error"));
    let rep = read_json(r.out("c/compare.json"));
    assert_eq!(rep["pass"], json!(false));
    assert!(rep["sup_rel_error"].as_f64().unwrap() > right);
    assert_eq!(rep["profile"]["k"].as_array().unwrap().len(), rep["profile"]["rel_error"].as_array().unwrap().len());
}

#[test]
fn compare_reports_every_metric() {
    let r = Run::new();
    let o = r.cmd("compare", &r.config("c.json", &bench(251)), &r.out("c"));
    let rep = read_json(r.out("c/compare.json"));
    for key in ["sup_abs_error", "sup_rel_error", "threshold_error_cells", "switch_time", "excluded_points", "tolerances"] {
        assert!(rep.get(key).is_some(), "{key}");
    }
    assert_eq!(code(&o) == 0, rep["pass"] == json!(true));
}

#[test]
fn outputs_stay_inside_the_out_dir() {
    let r = Run::new();
    let mut cfg = bench(201);
    cfg["output"] = json!({"directory": "results", "formats": ["json"]});
    let path = r.config("c.json", &cfg);
    assert_eq!(code(&r.qvi(&["solve", "--config", path.to_str().unwrap()])), 0);
    let mut top: Vec<String> =
        fs::read_dir(r.dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    top.sort();
    assert_eq!(top, vec!["c.json", "results"]);
    let mut files: Vec<String> =
        fs::read_dir(r.out("results")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, vec!["diagnostics.json", "meta.json", "regions.json"]);

    cfg["output"] = json!({});
    let path = r.config("c.json", &cfg);
    assert_eq!(code(&r.qvi(&["analytic", "--config", path.to_str().unwrap()])), 0);
    assert!(r.out("out/thresholds.json").exists());
}
