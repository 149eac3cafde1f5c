use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_descent")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, v: Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["audit", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("ERROR:"));
    let o = run(&["audit", "--config", "/nonexistent/x.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("ERROR:"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let no_seed = write_config(tmp.path(), "a.json", json!({ "version": 1, "kind": "grad-check" }));
    let out = tmp.path().join("o");
    let o = run(&["grad-check", "--config", &no_seed, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));

    let o = run(&["grad-check", "--config", &no_seed, "--out", out.to_str().unwrap(), "--seed", "11", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);

    let seeded = write_config(tmp.path(), "b.json", json!({ "version": 1, "kind": "grad-check", "seed": 5 }));
    let o = run(&["grad-check", "--config", &seeded, "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["seed"], 9);
}

#[test]
fn bad_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    for (name, cfg) in [
        ("kind.json", json!({ "version": 1, "kind": "train", "seed": 1 })),
        ("version.json", json!({ "version": 99, "kind": "audit", "seed": 1 })),
        ("typo.json", json!({ "version": 1, "kind": "audit", "seed": 1, "parameters": { "runz": 3 } })),
        ("extra.json", json!({ "version": 1, "kind": "audit", "seed": 1, "colour": "red" })),
    ] {
        let p = write_config(tmp.path(), name, cfg);
        let o = run(&["audit", "--config", &p, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("ERROR:"), "{name}");
    }
}

#[test]
fn failed_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(
        tmp.path(),
        "g.json",
        json!({ "version": 1, "kind": "grad-check", "seed": 1, "parameters": { "tol": 0.0 } }),
    );
    let out = tmp.path().join("o");
    let o = run(&["grad-check", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ERROR: assertion"));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["passed"], false);
}

#[test]
fn audit_manifest_records_checksums_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(
        tmp.path(),
        "a.json",
        json!({ "version": 1, "kind": "audit", "seed": 3, "parameters": { "runs": 30, "depth": 3, "aim_steps": 20 } }),
    );
    let out = tmp.path().join("o");
    let o = run(&["audit", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS no-certified-increase"));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["violations"], 0);
    let art = &m["artifacts"][0];
    let csv = std::fs::read(out.join(art["file"].as_str().unwrap())).unwrap();
    use sha2::Digest;
    assert_eq!(art["sha256"].as_str().unwrap(), hex::encode(sha2::Sha256::digest(&csv)));

    // the manifest's config reproduces the run
    let again = write_config(tmp.path(), "again.json", m["config"].clone());
    let out2 = tmp.path().join("o2");
    let o = run(&["audit", "--config", &again, "--out", out2.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out2.join("manifest.json")).unwrap(), std::fs::read(out.join("manifest.json")).unwrap());
}

#[test]
fn grid_flag_sets_raster_size() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "r.json", json!({ "version": 1, "kind": "raster-t", "seed": 2 }));
    let out = tmp.path().join("o");
    let o = run(&["raster-t", "--config", &p, "--out", out.to_str().unwrap(), "--grid", "21", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["artifacts"][0]["rows"], 441);
    assert_eq!(m["config"]["parameters"]["grid"], 21);
}

#[test]
fn embeddings_resolve_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("emb.txt"), "3 2\n0.1 0.2\n-0.3 0.4\n0.5 -0.6\n").unwrap();
    let p = write_config(
        tmp.path(),
        "e.json",
        json!({ "version": 1, "kind": "energy-curves", "seed": 1,
                "parameters": { "embeddings": "emb.txt", "d": 2, "n": 4, "samples": 5, "depth": 3 } }),
    );
    let out = tmp.path().join("o");
    let o = run(&["energy-curves", "--config", &p, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    assert!(out.join("energy_curves.csv").exists());
}

#[test]
fn shipped_configs_run_clean() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let spec: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let kind = spec["kind"].as_str().unwrap();
        let out = tmp.path().join(path.file_stem().unwrap());
        let o = run(&[kind, "--quiet", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
        seen += 1;
    }
    assert_eq!(seen, 8);
}
