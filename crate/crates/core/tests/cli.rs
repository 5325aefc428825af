use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(dir: &Path, sub: &str, config: &Value, extra: &[&str]) -> Output {
    let path = dir.join(format!("{sub}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_folner"))
        .arg(sub)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn odd_intervals() -> Value {
    json!({
        "ring": {"family": "integer_dual"},
        "sequence": {"kind": "intervals", "start": [0, 1], "end": [2, 1], "step": 2},
        "window": [-2, -1, 0, 1, 2],
        "policy": {"n_max": 200, "epsilon": 0.05, "tail_window": 10}
    })
}

#[test]
fn stabilizer_lists_even_members() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "stabilizer", &odd_intervals(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("label,verdict,final_ratio"));
    assert_eq!(lines.next(), Some("-2,Fixes,2/201"));
    assert_eq!(lines.next(), Some("-1,DoesNotFix,2"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("members: -2 0 2"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = run(dir.path(), "stabilizer", &odd_intervals(), &["--quiet"]);
    let b = run(dir.path(), "stabilizer", &odd_intervals(), &["--quiet"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stderr.is_empty());
}

#[test]
fn json_format_has_columns_rows_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "stabilizer",
        &odd_intervals(),
        &["--format", "json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["columns"], json!(["label", "verdict", "final_ratio"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert!(v["summary"].is_object());
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("result.csv");
    let out = run(
        dir.path(),
        "stabilizer",
        &odd_intervals(),
        &["--out", target.to_str().unwrap(), "--quiet"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(target)
        .unwrap()
        .starts_with("label,verdict,final_ratio\n"));
}

#[test]
fn fix_ratio_trace_is_exact() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "group": {"group": "free_abelian", "rank": 1},
        "sequence": {"kind": "intervals", "start": [0, 0], "end": [1, 0]},
        "element": 1,
        "n_max": 4
    });
    let out = run(dir.path(), "fix-ratio", &config, &["--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "n,ratio\n1,1\n2,2/3\n3,1/2\n4,2/5\n");
}

#[test]
fn free_orthogonal_generator_does_not_fix() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "ring": {"family": "free_orthogonal", "n": 3},
        "sequence": {"kind": "initial_segments"},
        "labels": [1],
        "policy": {"n_max": 20, "epsilon": 0.05, "tail_window": 5}
    });
    let out = run(dir.path(), "folner-check", &config, &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.lines().skip(1).all(|l| l.ends_with(",DoesNotFix")),
        "{text}"
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict[1]: DoesNotFix"));
}

#[test]
fn verify_ring_clean_is_header_only() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        "verify-ring",
        &json!({"ring": {"family": "su2"}}),
        &["--quiet"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "violation\n");
}

#[test]
fn verify_ring_accepts_s3_table() {
    let dir = TempDir::new().unwrap();
    let ring: Value = serde_json::from_str(include_str!("data/s3.json")).unwrap();
    let out = run(
        dir.path(),
        "verify-ring",
        &json!({"ring": ring}),
        &["--quiet"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out), "violation\n");
}

#[test]
fn broken_ring_exits_with_verification_failure() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "ring": {
            "labels": [{"id": 0, "dim": 1, "conj": 0}, {"id": 1, "dim": 1, "conj": 1}],
            "fusion": [[0, 0, 0, 1], [0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 1, 1]]
        },
        "window": [0, 1]
    });
    let out = run(dir.path(), "verify-ring", &config, &["--quiet"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).lines().count() > 1);
}

#[test]
fn bad_configs_exit_with_config_error() {
    let dir = TempDir::new().unwrap();
    let mut config = odd_intervals();
    config["policy"]["epsilon"] = json!(2.0);
    let out = run(dir.path(), "stabilizer", &config, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.policy"));

    let out = run(
        dir.path(),
        "stabilizer",
        &json!({"ring": {"family": "nope"}}),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));

    let missing = Command::new(env!("CARGO_BIN_EXE_folner"))
        .args(["stabilizer", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn ergodic_orbit_decay_csv() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "model": "integer_dual", "grid": ["1"],
        "sequence": {"kind": "symmetric_intervals"},
        "check": "orbit_decay", "n_max": 200, "tol": 0.005,
        "x": [1, 1], "y": [1, -1], "witness": [1, 0]
    });
    let out = run(dir.path(), "ergodic", &config, &["--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,norm");
    assert_eq!(lines.len(), 201);
    for line in &lines[1..] {
        let (n, v) = line.split_once(',').unwrap();
        let n: f64 = n.parse().unwrap();
        let v: f64 = v.parse().unwrap();
        assert!((v - 2.0 / (2.0 * n + 1.0)).abs() < 1e-10);
    }
}

#[test]
fn ap_search_finds_progression() {
    let dir = TempDir::new().unwrap();
    let config = json!({
        "group": {"group": "free_abelian"},
        "set": {"kind": "residue", "mod": 3, "classes": [0]},
        "b": 1, "k": 3, "n_max": 10, "radius": 10
    });
    let out = run(dir.path(), "ap-search", &config, &["--quiet"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains(",3,"), "{}", stdout(&out));
}
