use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const T3: &str = r#"{"num_vertices":3,"root":0,"edges":[[0,1,1],[1,0,1],[1,2,1],[2,1,1],[0,2,1],[2,0,1]],"groups":[[1],[2]]}"#;
/// Vertex 2 has no way back to the root.
const STRANDED: &str =
    r#"{"num_vertices":3,"root":0,"edges":[[0,1,1],[1,0,1],[1,2,1]],"groups":[[2]]}"#;

fn gip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Workdir(TempDir);

impl Workdir {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn file(&self, name: &str, contents: &str) -> String {
        let p = self.path(name);
        fs::write(&p, contents).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_is_reproducible_and_writes_geometry() {
    let dir = Workdir::new();
    let a = dir.arg("a.json");
    let b = dir.arg("b.json");
    for out in [&a, &b] {
        let run = gip(&["gen", "--n", "60", "--k", "4", "--seed", "7", "--out", out]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let geometry = read_json(&dir.path("a.geometry.json"));
    assert_eq!(geometry["pois"].as_array().unwrap().len(), 4);
    assert_eq!(geometry["configs"].as_array().unwrap().len(), 60);
    let instance = read_json(&dir.path("a.json"));
    assert_eq!(instance["num_vertices"], 60);
}

#[test]
fn gen_prints_without_out_and_matches_file() {
    let dir = Workdir::new();
    let out = dir.arg("i.json");
    gip(&["gen", "--n", "40", "--k", "3", "--seed", "2", "--out", &out]);
    let printed = gip(&["gen", "--n", "40", "--k", "3", "--seed", "2"]);
    assert_eq!(code(&printed), 0);
    assert_eq!(
        stdout(&printed).trim_end(),
        fs::read_to_string(&out).unwrap()
    );
}

#[test]
fn gen_rejects_bad_flags() {
    assert_eq!(code(&gip(&["gen", "--n", "0"])), 2);
    assert_eq!(code(&gip(&["gen", "--n", "10", "--range", "0"])), 2);
    assert_eq!(code(&gip(&["gen", "--n", "10", "--fov-deg", "-5"])), 2);
    assert_eq!(code(&gip(&["gen", "--n", "ten"])), 2);
    assert_eq!(code(&gip(&["gen"])), 2);
}

#[test]
fn every_formulation_solves_t3_to_cost_three() {
    let dir = Workdir::new();
    let inst = dir.file("t3.json", T3);
    for formulation in ["scf", "mcf", "cutset"] {
        let report = dir.arg(&format!("{formulation}.report.json"));
        let run = gip(&[
            "solve",
            &inst,
            "--formulation",
            formulation,
            "--report",
            &report,
        ]);
        assert_eq!(code(&run), 0, "{formulation}");
        let report = read_json(Path::new(&report));
        assert_eq!(report["ub"], 3.0, "{formulation}");
        assert_eq!(report["lb"], 3.0, "{formulation}");
        assert_eq!(report["gap_pct"], 0.0, "{formulation}");
        assert_eq!(report["termination"], "optimal", "{formulation}");
        assert!(report["wall_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn solve_writes_a_verifiable_tour_and_a_consistent_log() {
    let dir = Workdir::new();
    let inst = dir.file("t3.json", T3);
    let tour = dir.arg("tour.json");
    let log = dir.arg("log.csv");
    let run = gip(&[
        "solve", &inst, "--oracle", "cc", "--tour", &tour, "--log", &log,
    ]);
    assert_eq!(code(&run), 0);
    let report: Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(report["ub"], 3.0);

    let tour_file = read_json(Path::new(&tour));
    assert_eq!(tour_file["edges"].as_array().unwrap().len(), 3);
    let verified = gip(&["verify", &inst, &tour]);
    assert_eq!(code(&verified), 0);
    assert_eq!(stdout(&verified).trim().parse::<f64>().unwrap(), 3.0);

    let text = fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("elapsed_s,ub,lb,gap_pct,event"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').take(4).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty());
    for pair in rows.windows(2) {
        assert!(pair[1][1] <= pair[0][1]);
        assert!(pair[1][2] >= pair[0][2]);
    }
    for row in &rows {
        if row[1].is_finite() {
            let gap = 100.0 * (row[1] - row[2]) / row[1];
            assert!((row[3] - gap).abs() <= 1e-9 * gap.abs().max(1.0));
        }
    }
    let last = rows.last().unwrap();
    assert_eq!(last[1], last[2]);
}

#[test]
fn solve_exit_codes() {
    let dir = Workdir::new();
    let stranded = dir.file("stranded.json", STRANDED);
    let run = gip(&["solve", &stranded]);
    assert_eq!(code(&run), 3);
    let report: Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(report["termination"], "infeasible");
    assert_eq!(report["ub"], Value::Null);

    let t3 = dir.file("t3.json", T3);
    assert_eq!(
        code(&gip(&[
            "solve",
            &t3,
            "--formulation",
            "scf",
            "--oracle",
            "flow"
        ])),
        2
    );
    assert_eq!(code(&gip(&["solve", &t3, "--sample-size", "0"])), 2);
    assert_eq!(code(&gip(&["solve", &t3, "--quota", "3"])), 2);
    assert_eq!(code(&gip(&["solve", &dir.arg("missing.json")])), 2);
    let garbage = dir.file("garbage.json", "{\"num_vertices\": }");
    assert_eq!(code(&gip(&["solve", &garbage])), 2);
}

#[test]
fn oversized_multi_commodity_flow_hits_the_memory_guard() {
    let dir = Workdir::new();
    let inst = dir.arg("big.json");
    let made = gip(&[
        "gen", "--n", "1000", "--k", "50", "--seed", "1", "--out", &inst,
    ]);
    assert_eq!(code(&made), 0);
    let run = gip(&["solve", &inst, "--formulation", "mcf", "--time-limit", "1"]);
    assert_eq!(code(&run), 4);
    assert!(String::from_utf8_lossy(&run.stderr).contains("memory guard"));
}

#[test]
fn quota_relaxes_coverage() {
    let dir = Workdir::new();
    let inst = dir.file("t3.json", T3);
    let run = gip(&["solve", &inst, "--quota", "1", "--formulation", "scf"]);
    assert_eq!(code(&run), 0);
    let report: Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(report["ub"], 2.0);
    let brute = gip(&["bruteforce", &inst, "--quota", "1"]);
    assert_eq!(stdout(&brute).trim().parse::<f64>().unwrap(), 2.0);
}

#[test]
fn work_limited_solves_are_reproducible() {
    let dir = Workdir::new();
    let inst = dir.arg("i.json");
    let made = gip(&[
        "gen",
        "--n",
        "200",
        "--k",
        "8",
        "--fov-deg",
        "360",
        "--range",
        "60",
        "--seed",
        "2",
        "--out",
        &inst,
    ]);
    assert_eq!(code(&made), 0);
    let run = || {
        let out = gip(&[
            "solve",
            &inst,
            "--sample-size",
            "5",
            "--work-limit",
            "2000",
            "--time-limit",
            "600",
        ]);
        let mut report: Value = serde_json::from_str(&stdout(&out)).unwrap();
        report.as_object_mut().unwrap().remove("wall_s");
        (code(&out), report)
    };
    let first = run();
    assert_eq!(first, run());
    assert_eq!(first.0, 0);
    assert_eq!(first.1["termination"], "work_limit");
    assert!(first.1["tour"].is_array());
}

#[test]
fn verify_exit_codes() {
    let dir = Workdir::new();
    let inst = dir.file("t3.json", T3);
    let partial = dir.file("partial.json", r#"{"edges":[[0,1],[1,0]]}"#);
    let run = gip(&["verify", &inst, &partial]);
    assert_eq!(code(&run), 5);
    assert!(String::from_utf8_lossy(&run.stderr).contains("group 1"));
    assert_eq!(code(&gip(&["verify", &inst, &partial, "--quota", "1"])), 0);

    let unknown = dir.file("unknown.json", r#"{"edges":[[0,1],[1,1]]}"#);
    assert_eq!(code(&gip(&["verify", &inst, &unknown])), 5);
    let open = dir.file("open.json", r#"{"edges":[[0,1],[1,2]]}"#);
    assert_eq!(code(&gip(&["verify", &inst, &open])), 5);
    let malformed = dir.file("malformed.json", r#"{"edges":[[0,1,2]]}"#);
    assert_eq!(code(&gip(&["verify", &inst, &malformed])), 2);
    let not_json = dir.file("not.json", "edges: 0 1");
    assert_eq!(code(&gip(&["verify", &inst, &not_json])), 2);
}

#[test]
fn bruteforce_exit_codes() {
    let dir = Workdir::new();
    let t3 = dir.file("t3.json", T3);
    let tour = dir.arg("best.json");
    let run = gip(&["bruteforce", &t3, "--tour", &tour]);
    assert_eq!(code(&run), 0);
    assert_eq!(stdout(&run).trim().parse::<f64>().unwrap(), 3.0);
    assert_eq!(code(&gip(&["verify", &t3, &tour])), 0);

    let stranded = dir.file("stranded.json", STRANDED);
    assert_eq!(code(&gip(&["bruteforce", &stranded])), 3);
    assert_eq!(code(&gip(&["bruteforce", &t3, "--max-edges", "4"])), 4);
}

#[test]
fn plot_charts_a_solved_log() {
    let dir = Workdir::new();
    let inst = dir.file("t3.json", T3);
    let log = dir.arg("log.csv");
    gip(&["solve", &inst, "--formulation", "scf", "--log", &log]);
    let svg = dir.arg("chart.svg");
    assert_eq!(code(&gip(&["plot", &log, "--out", &svg])), 0);
    let first = fs::read_to_string(&svg).unwrap();
    assert!(first.starts_with("<svg"));
    assert!(first.contains("final gap 0.00 %"));
    gip(&["plot", &log, "--out", &svg]);
    assert_eq!(first, fs::read_to_string(&svg).unwrap());
}

#[test]
fn plot_rejects_empty_and_malformed_logs() {
    let dir = Workdir::new();
    let out = dir.arg("chart.svg");
    let empty = dir.file("empty.csv", "");
    assert_eq!(code(&gip(&["plot", &empty, "--out", &out])), 2);
    let header_only = dir.file("header.csv", "elapsed_s,ub,lb,gap_pct,event\n");
    assert_eq!(code(&gip(&["plot", &header_only, "--out", &out])), 2);
    let malformed = dir.file(
        "bad.csv",
        "elapsed_s,ub,lb,gap_pct,event\n0.1,three,1,2,node\n",
    );
    assert_eq!(code(&gip(&["plot", &malformed, "--out", &out])), 2);
    assert!(!Path::new(&out).exists());
}
