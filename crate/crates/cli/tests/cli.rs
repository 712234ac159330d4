use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn perigid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perigid"))
        .args(args)
        .env_remove("PERIGID_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn export(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    let p = path.to_str().unwrap().to_string();
    let out = perigid(&["fixtures", "--name", name, "--emit", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn certify_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    for (name, mode, verdict) in [
        ("flex1", "flexible", "SuperStable"),
        ("flex2", "flexible", "SuperStable"),
        ("flex2-tensegrity", "flexible", "SuperStable"),
        ("octagon", "flexible", "SuperStable"),
        ("hex", "fixed", "FixedLatticeSuperStable"),
    ] {
        let p = export(dir.path(), name);
        let out = perigid(&["--json", "certify", &p, "--mode", mode]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(json_of(&out)["verdict"], verdict, "{name}");
    }
}

#[test]
fn negative_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "hex");
    let out = perigid(&["--json", "certify", &p]);
    assert_eq!(out.status.code(), Some(1));
    let report = json_of(&out);
    assert_eq!(report["verdict"], "Inconclusive");
    assert!(!report["certificate"]["failed"].as_array().unwrap().is_empty());
}

#[test]
fn computed_volume_stress() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "hex");
    let out = perigid(&["--json", "certify", &p, "--mode", "volume", "--stress", "compute"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_of(&out);
    assert_eq!(report["verdict"], "VolumeSuperStable");
    let lambda = report["certificate"]["lambda"].as_f64().unwrap();
    assert!((lambda - 1.0 / 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn minimize_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "hex");
    let min = dir.path().join("min.json");
    let out = perigid(&["--json", "minimize", &p, "--emit", min.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["kkt"]["pass"], true);
    let out = perigid(&["--json", "certify", min.to_str().unwrap(), "--mode", "volume"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json_of(&out)["verdict"], "VolumeSuperStable");
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = perigid(&["info", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dimension": 2, "vertices": [{"name": "a"}], "edges": [{"tail": "a", "head": "b", "gain": [0, 0]}]}"#).unwrap();
    let out = perigid(&["--json", "info", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = json_of(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("$.edges[0]"), "{msg}");

    let out = perigid(&["--tol", "-1", "info", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spiderweb_gate() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "flex2");
    let out = perigid(&["certify", &p, "--mode", "spiderweb"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a spiderweb"));
}

#[test]
fn generic_test_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "flex2");
    let a = perigid(&["--json", "--seed", "7", "generic-test", &p, "--trials", "5"]);
    let b = perigid(&["--json", "--seed", "7", "generic-test", &p, "--trials", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(json_of(&a)["certificate"]["trials"].as_array().unwrap().len(), 5);

    let c = Command::new(env!("CARGO_BIN_EXE_perigid"))
        .args(["--json", "generic-test", &p, "--trials", "5"])
        .env("PERIGID_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn fixture_export_is_stable() {
    let a = perigid(&["fixtures", "--name", "octagon"]);
    let b = perigid(&["fixtures", "--name", "octagon"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["edges"].as_array().unwrap().len(), 12);
}

#[test]
fn from_finite_octagon() {
    let dir = tempfile::tempdir().unwrap();
    let fin = export(dir.path(), "octagon-finite");
    let out_path = dir.path().join("folded.json");
    let out = perigid(&["--json", "from-finite", &fin, "--pairs", "0:4,2:6", "--emit", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_of(&out);
    assert!(report["conjugation_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(report["vertices"], 6);
    let out = perigid(&["--json", "certify", out_path.to_str().unwrap()]);
    assert_eq!(json_of(&out)["verdict"], "SuperStable");

    let out = perigid(&["from-finite", &fin, "--pairs", "0:4,4:6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cover_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "hex");
    let svg = dir.path().join("hex.svg");
    let out = perigid(&["--json", "cover", &p, "--window", "2", "--svg", svg.to_str().unwrap()]);
    assert!(out.status.success());
    let report = json_of(&out);
    assert!(report["force_residual"].as_f64().unwrap() <= 1e-9);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<circle").count(), report["cover_vertices"].as_u64().unwrap() as usize);
}

#[test]
fn rank_emits_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let p = export(dir.path(), "flex2");
    let out = perigid(&["--json", "--emit-matrices", "rank", &p]);
    let report = json_of(&out);
    assert_eq!(report["rigidity"]["rank"], 4);
    assert_eq!(report["infinitesimally_rigid"], false);
    let lzd = report["matrices"]["laplacian_zd"].as_array().unwrap();
    assert_eq!(lzd.len(), 4);
}

#[test]
fn batch_runs_every_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["flex2", "hex", "octagon"] {
        export(dir.path(), name);
    }
    let run = || perigid(&["--json", "--batch", dir.path().to_str().unwrap(), "certify"]);
    let a = run();
    let b = run();
    assert_eq!(a.stdout, b.stdout);
    // hex fails the flexible certificate, so the batch exits 1.
    assert_eq!(a.status.code(), Some(1));
    let report = json_of(&a);
    let entries = report["batch"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let codes: Vec<i64> = entries.iter().map(|e| e["exit_code"].as_i64().unwrap()).collect();
    assert_eq!(codes, [0, 1, 0]);
}
