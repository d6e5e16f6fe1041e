mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aapdhg"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn toy_path() -> String {
    data_path("toy.mps").display().to_string()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("trajectory.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn toy_instance_is_solved_quickly_with_acceleration() {
    let out = TempDir::new().unwrap();
    let o = out.path().display().to_string();
    let res = run(&[
        "--instance", &toy_path(), "--method", "aa-pdhg", "--m", "5", "--D", "1", "--eps", "1", "--toll", "1e-4", "--out", &o,
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(out.path());
    assert_eq!(s["status"], "RESIDUAL_TOL");
    assert!(s["iterations"].as_u64().unwrap() <= 100);
}

#[test]
fn vanilla_run_on_toy_instance_hits_the_iteration_cap() {
    let out = TempDir::new().unwrap();
    let o = out.path().display().to_string();
    let res = run(&["--instance", &toy_path(), "--method", "pdhg", "--max-iters", "1000", "--out", &o]);
    let s = summary(out.path());
    assert_eq!(
        res.status.code(),
        Some(2),
        "status {} after {} iterations",
        s["status"],
        s["iterations"]
    );
}

#[test]
fn summary_agrees_with_the_trajectory() {
    let out = TempDir::new().unwrap();
    let o = out.path().display().to_string();
    let afiro = data_path("afiro.mps").display().to_string();
    let res = run(&["--instance", &afiro, "--method", "faa-pdhg", "--max-iters", "400", "--out", &o]);
    assert_eq!(res.status.code(), Some(2));
    let s = summary(out.path());
    let rows = csv_rows(out.path());
    let header = fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "k,g_norm,step_type,i,j,r_gap,r_primal,r_dual,objective,elapsed_s");
    let iterations = s["iterations"].as_u64().unwrap() as usize;
    assert_eq!(iterations, 400);
    assert_eq!(rows.len(), iterations + 1);
    let last = rows.last().unwrap();
    assert_eq!(last[2], "STOP");
    assert_eq!(last[8].parse::<f64>().unwrap(), s["objective"].as_f64().unwrap());
    assert_eq!(last[1].parse::<f64>().unwrap(), s["final_g_norm"].as_f64().unwrap());
    assert_eq!(
        s["i"].as_u64().unwrap() + s["j"].as_u64().unwrap(),
        iterations as u64
    );
    assert_eq!((s["rows"].as_u64(), s["cols"].as_u64()), (Some(27), Some(32)));
    assert_eq!(s["config"]["method"], "faa-pdhg");
}

#[test]
fn runs_are_reproducible_apart_from_timings() {
    let afiro = data_path("afiro.mps").display().to_string();
    let strip = |dir: &Path| -> Vec<String> {
        csv_rows(dir).into_iter().map(|mut r| {
            r.pop();
            r.join(",")
        }).collect()
    };
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = d.path().display().to_string();
        run(&["--instance", &afiro, "--method", "aa-pdhg", "--max-iters", "300", "--out", &o]);
    }
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let out = TempDir::new().unwrap();
    let o = out.path().display().to_string();
    let res = Command::new(env!("CARGO_BIN_EXE_aapdhg"))
        .args(["--instance", &toy_path(), "--method", "aa-pdhg", "--sweep-D", "0.1,1,10,100", "--out", &o])
        .env("AAPDHG_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let mut dirs: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    assert_eq!(dirs, ["D_0.1", "D_1", "D_10", "D_100"]);
    for d in &dirs {
        let dir = out.path().join(d);
        assert!(dir.join("trajectory.csv").is_file());
        let s = summary(&dir);
        assert_eq!(s["config"]["d"].as_f64().unwrap(), d[2..].parse::<f64>().unwrap());
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let out = TempDir::new().unwrap();
    let cfg = out.path().join("run.cfg");
    fs::write(&cfg, format!("# toy run\ninstance = {}\nmethod = pdhg\nmax-iters = 7\n", toy_path())).unwrap();
    let o = out.path().join("res");
    let res = run(&["--config", cfg.to_str().unwrap(), "--max-iters", "5", "--out", o.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let s = summary(&o);
    assert_eq!(s["method"], "pdhg");
    assert_eq!(s["iterations"], 5);
}

#[test]
fn input_errors_exit_with_one() {
    let out = TempDir::new().unwrap();
    let o = out.path().display().to_string();

    let missing = run(&["--instance", "/definitely/not/here.mps", "--out", &o]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cannot load instance"));

    let bad = out.path().join("bad.mps");
    fs::write(&bad, "NAME X\nROWS\n N obj\nCOLUMNS\n    x  nowhere  1\nENDATA\n").unwrap();
    let malformed = run(&["--instance", bad.to_str().unwrap(), "--out", &o]);
    assert_eq!(malformed.status.code(), Some(1));

    let conflict = run(&["--instance", &toy_path(), "--tau", "0.1", "--out", &o]);
    assert_eq!(conflict.status.code(), Some(1));
    let conflict = run(&["--instance", &toy_path(), "--D", "1", "--sweep-D", "1,2", "--out", &o]);
    assert_eq!(conflict.status.code(), Some(1));

    let unknown = run(&["--instance", &toy_path(), "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));

    // distinct messages for distinct problems
    let m1 = String::from_utf8_lossy(&missing.stderr).into_owned();
    let m2 = String::from_utf8_lossy(&malformed.stderr).into_owned();
    assert_ne!(m1, m2);
}
