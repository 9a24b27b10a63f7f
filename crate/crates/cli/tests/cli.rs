use std::fs;
use std::process::Command;

fn tslb() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tslb"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cavity.cfg");
    fs::write(
        &cfg,
        format!(
            "lattice=d2q9\ndims=16,16\nnu=0.05\ncase=cavity\nu_lid=0.05\nsteps=40\nsample_every=10\noutput_dir={}\n",
            out.display()
        ),
    )
    .unwrap();
    let res = tslb().arg("run").arg(&cfg).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["steps"], 40);
    for f in ["summary.json", "series.csv", "fields_final.vtk"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "lattice=d2q9\ndims=16,16\nomega=1\nnu=0.1\ncase=cavity\ncolour=red\n").unwrap();
    let res = tslb().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("'omega' (line 3)") && err.contains("'nu' (line 4)"), "{err}");
    assert!(err.contains("line 6: unknown key 'colour'"), "{err}");
    assert!(err.contains("u_lid"), "{err}");
}

#[test]
fn unknown_validation_case() {
    let res = tslb().args(["validate", "no-such-case"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn short_validation_run_reports_a_verdict() {
    let res = tslb().args(["validate", "cavity", "--steps", "200"]).output().unwrap();
    let text = String::from_utf8_lossy(&res.stdout);
    // far from converged, so the profiles miss the reference
    assert!(text.starts_with("FAIL cavity:"), "{text}");
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn bench_reports_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.cfg");
    fs::write(
        &cfg,
        "lattice=d3q19\ndims=12,12,12\nomega=1\ncase=custom\nsteps=3\nwarmup=1\nbench_workers=1,2\nmachine_pi=1e12\nmachine_beta=1e11\n",
    )
    .unwrap();
    let res = tslb().env("TSLB_WORKERS", "3").arg("bench").arg(&cfg).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(table["bit_identical"], true);
    assert_eq!(table["runs"].as_array().unwrap().len(), 2);
    assert_eq!(table["runs"][0]["bound_kind"], "memory");
}
