use std::path::Path;
use std::process::{Command, Output};

use cmalab::fieldio;
use cmalab_core::field::{test_solution, BallDomain, GridField};

fn cmalab(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cmalab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("spawn cmalab")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exponents_job_writes_beta0() {
    let d = tempfile::tempdir().unwrap();
    let out = cmalab(
        &["exponents"],
        r#"{"kind":"exponents","seed":7,"payload":{"n":2,"alpha":1.0,"beta":0.95,"delta":0.9}}"#,
        d.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = json(&d.path().join("out/exponents.json"));
    assert!((e["beta0"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!(e["chosen_params"]["mu"].as_f64().is_some());
    let s = json(&d.path().join("out/summary.json"));
    assert_eq!(s["pass"], true);
    assert_eq!(s["seed"], 7);
    assert_eq!(s["kind"], "exponents");
}

#[test]
fn malformed_payload_is_a_schema_error() {
    let d = tempfile::tempdir().unwrap();
    let out = cmalab(&["run"], r#"{"kind":"exponents","seed":1,"payload":{"n":2,"alfa":1.0}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.path().join("out").exists());

    let out = cmalab(&["run"], r#"{"kind":"exponents","seed":1,"payload":{"n":7,"alpha":1.0}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.path().join("out").exists());
}

#[test]
fn missing_seed_is_a_schema_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"exponents","payload":{"n":1,"alpha":1.0}}"#;
    let out = cmalab(&["exponents"], cfg, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = cmalab(&["exponents", "--seed", "3"], cfg, d.path());
    assert!(out.status.success());
}

#[test]
fn subcommand_must_match_kind() {
    let d = tempfile::tempdir().unwrap();
    let out = cmalab(&["solve"], r#"{"kind":"exponents","seed":1,"payload":{"n":1,"alpha":1.0}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_a_readable_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"solve","seed":1,"payload":{"domain":{"solution":"EXP","n":1,
        "center":[0.0,0.0],"radius":0.5,"points_per_radius":8},"csv":true}}"#;
    let out = cmalab(&["solve"], cfg, d.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let f = fieldio::load(&d.path().join("out/solution.field")).unwrap();
    let s = test_solution("EXP", 1).unwrap();
    let err = f.interior().map(|i| (f.values[i] - s.u(&f.point(i)[..2])).abs()).fold(0.0, f64::max);
    assert!(err < 1e-2, "{err}");
    let csv = std::fs::read_to_string(d.path().join("out/solution.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x0,x1,value,cell"));
}

#[test]
fn field_round_trip() {
    let ball = BallDomain::new(2, &[0.1, 0.0, -0.2, 0.3], 0.4).unwrap();
    let g = GridField::sample_ball(ball, 0.1, 2, |x| x[0] * x[0] - 3.0 * x[3]).unwrap();
    let mut bytes = Vec::new();
    fieldio::write_field(&mut bytes, &g).unwrap();
    let back = fieldio::read_field(bytes.as_slice()).unwrap();
    assert_eq!(back, g);

    bytes.truncate(bytes.len() - 1);
    assert!(fieldio::read_field(bytes.as_slice()).is_err());
    assert!(fieldio::read_field(&b"{\"format\":\"other\"}\n"[..]).is_err());
}
