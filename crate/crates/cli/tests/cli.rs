use std::path::Path;
use std::process::{Command, Output};

use hardy_flow::evolution::TRACE_HEADER;

const SMALL: &str = r#"
name = "small"
dim = 3
seed = 5
analyses = ["classify", "evolve", "decay-fit"]

[grid]
m = 256

[initial]
amplitude = 0.1

[evolution]
dt0 = 4e-3
s_max = 20.0

[depth]
restarts = 2
max_iter = 300
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn constants_subcommand_prints_json() {
    let out = lab(&["constants", "--dim", "4"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["beta"], 0.5);
    assert_eq!(json["p"], 3.0);
    assert_eq!(json["hardy"], 1.0);
}

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "name = \"x\"\ndim = [\n");
    let out_dir = dir.path().join("out");
    let out = lab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("line"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_family_and_invalid_coupling_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let fam = write(
        dir.path(),
        "fam.toml",
        "name = \"x\"\ndim = 3\n[initial]\nfamily = \"sech\"\n",
    );
    let out = lab(&["evolve", "--config", &fam, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let mu = write(dir.path(), "mu.toml", "name = \"x\"\ndim = 3\nmu = 0.5\n");
    let out = lab(&["classify", "--config", &mu, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    let missing = lab(&["run", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(missing.status.code(), Some(8));
    assert!(!out_dir.exists());
}

#[test]
fn evolve_writes_report_trace_and_summary_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = lab(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    let rb = std::fs::read(b.join("report.json")).unwrap();
    assert_eq!(ra, rb);

    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["evolve"]["outcome"]["label"], "GLOBAL_DECAY");
    assert_eq!(report["classify"]["prediction"], "GLOBAL_DECAY");
    assert_eq!(report["evolve"]["agreement"], true);
    assert!(report["classify"]["high_energy_reading"]
        .as_str()
        .unwrap()
        .contains("squared"));
    assert!(report["decay_fit"]["fit"]["satisfied"].as_bool().unwrap());

    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some(TRACE_HEADER));
    let summary = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("GLOBAL_DECAY"));

    let reseeded = dir.path().join("c");
    let res = lab(&["evolve", "--config", &cfg, "--out", reseeded.to_str().unwrap(), "--seed", "9"]);
    assert!(res.status.success());
    let rc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(reseeded.join("report.json")).unwrap()).unwrap();
    assert_eq!(rc["seed"], 9);
}

#[test]
fn sweep_with_an_empty_list_writes_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "name = \"s\"\ndim = 3\n[grid]\nm = 128\n[depth]\nrestarts = 1\nmax_iter = 100\n",
    );
    let out_dir = dir.path().join("out");
    let res = lab(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--threads", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn file_family_reads_a_profile_next_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let values: String = (0..64)
        .map(|i| {
            let r = (i as f64 + 0.5) * 12.0 / 64.0;
            format!("{}\n", 0.1 * (-0.25 * r * r).exp())
        })
        .collect();
    write(dir.path(), "profile.txt", &values);
    let cfg = write(
        dir.path(),
        "file.toml",
        "name = \"f\"\ndim = 3\n[grid]\nm = 64\n[initial]\nfamily = \"file\"\npath = \"profile.txt\"\n[depth]\nrestarts = 1\nmax_iter = 50\n",
    );
    let out_dir = dir.path().join("out");
    let res = lab(&["classify", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["classify"]["classification"]["in_nehari_plus"], true);
}

#[test]
fn bundled_scenarios_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            hardy_lab::load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 6);
}
