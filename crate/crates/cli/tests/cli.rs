//! End-to-end tests of the library commands and the `modbohm` binary.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use modbohm::qcorr::{Convention, QbarMode};
use modbohm_cli::bundle::{load_bundle, SERIES_HEADER, SNAPSHOT_HEADER, TRAJECTORY_HEADER};
use modbohm_cli::commands::{compare, export, identities, simulate};
use modbohm_cli::identities::{IdentityOptions, Status};
use modbohm_cli::report::{NORM_SERIES_HEADER, SNAPSHOT_EXPORT_HEADER};
use modbohm_cli::{CliError, ScenarioConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

fn base() -> Value {
    json!({
        "grid": { "sites": 64, "spacing": 0.5, "origin": -16.0, "boundary": "periodic" },
        "initial": { "kind": "gaussian", "center": 0.0, "width": 1.0, "phase": FRAC_PI_2 },
        "stepping": { "dt": 0.01, "t_end": 0.1, "output_stride": 5, "mode": "standard" },
        "trajectories": { "count": 200, "seed": 3, "record_stride": 5 }
    })
}

fn with_functional(mut v: Value) -> Value {
    v["functional"] = json!({
        "half_width": 6.0, "points": 128, "center": [1.0, 0.0], "width": 1.0,
        "evolve": false
    });
    v
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn config_error(v: Value) -> String {
    match ScenarioConfig::from_json(&v.to_string()).and_then(|c| c.validate()) {
        Err(CliError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_modbohm"));
    cmd.arg("--quiet");
    cmd
}

#[test]
fn base_config_validates() {
    let s = ScenarioConfig::from_json(&base().to_string()).unwrap().validate().unwrap();
    assert_eq!(s.steps, 10);
    assert!(s.functional.is_none());
    let s = ScenarioConfig::from_json(&with_functional(base()).to_string())
        .unwrap()
        .validate()
        .unwrap();
    assert!(s.functional.is_some());
}

#[test]
fn invalid_configs_name_the_offending_field() {
    let mut v = base();
    v["stepping"]["t_end"] = json!(0.105);
    assert_eq!(config_error(v), "stepping.t_end");

    let mut v = base();
    v["initial"]["center"] = json!(14.0);
    assert!(config_error(v).starts_with("initial"));

    let mut v = base();
    v["grid"]["spacing"] = json!(-0.5);
    assert!(config_error(v).starts_with("grid"));

    let mut v = base();
    v["trajectories"]["count"] = json!(0);
    assert_eq!(config_error(v), "trajectories.count");

    let mut v = with_functional(base());
    v["functional"]["sites"] = json!(3);
    assert_eq!(config_error(v), "functional.sites");

    let mut v = with_functional(base());
    v["functional"]["points"] = json!(7);
    assert!(config_error(v).starts_with("functional."));
}

#[test]
fn unknown_keys_are_rejected() {
    let mut v = base();
    v["grid"]["spacng"] = json!(0.5);
    assert!(matches!(
        ScenarioConfig::from_json(&v.to_string()),
        Err(CliError::Config { .. })
    ));
}

#[test]
fn simulate_writes_a_loadable_bundle_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &base());
    let out = tmp.path().join("run");
    let (dir, output) = simulate(&cfg, Some(&out), None).unwrap();
    assert_eq!(dir, out);
    assert_eq!(output.series.len(), 3);

    assert_eq!(first_line(&out.join("series.csv")), SERIES_HEADER.join(","));
    assert_eq!(first_line(&out.join("snapshots.csv")), SNAPSHOT_HEADER.join(","));
    assert_eq!(first_line(&out.join("trajectories.csv")), TRAJECTORY_HEADER.join(","));
    let persisted = fs::read_to_string(out.join("config.json")).unwrap();
    assert_eq!(persisted, fs::read_to_string(&cfg).unwrap());

    let bundle = load_bundle(&out).unwrap();
    assert_eq!(bundle.series.len(), 3);
    assert_eq!(bundle.snapshots.len(), 3 * 64);
    assert_eq!(bundle.trajectories.as_ref().map(Vec::len), Some(3 * 200));

    let files = export(&out, None).unwrap();
    assert_eq!(files.dir, out.join("report"));
    assert!(files.files.iter().any(|f| f == "snapshot_00002.csv"));
    assert_eq!(first_line(&files.dir.join("norm_series.csv")), NORM_SERIES_HEADER.join(","));
    assert_eq!(
        first_line(&files.dir.join("snapshot_00000.csv")),
        SNAPSHOT_EXPORT_HEADER.join(",")
    );
}

#[test]
fn standard_norm_is_conserved_in_the_series() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &base());
    let (_, output) = simulate(&cfg, Some(&tmp.path().join("run")), None).unwrap();
    assert!(!output.series.is_empty());
    for row in &output.series {
        assert!((row.norm - 1.0).abs() < 1e-12, "norm {} at t = {}", row.norm, row.t);
    }
}

#[test]
fn seed_override_is_persisted() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &base());
    let out = tmp.path().join("run");
    simulate(&cfg, Some(&out), Some(99)).unwrap();
    let persisted: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(persisted["trajectories"]["seed"], json!(99));

    let again = tmp.path().join("again");
    simulate(&out.join("config.json"), Some(&again), None).unwrap();
    assert_eq!(
        fs::read(out.join("trajectories.csv")).unwrap(),
        fs::read(again.join("trajectories.csv")).unwrap()
    );
}

#[test]
fn modes_coincide_without_a_potential() {
    let tmp = TempDir::new().unwrap();
    let mut v = with_functional(base());
    v["stepping"]["mode"] = json!("modified");
    let cfg = write_config(tmp.path(), &v);
    let out = tmp.path().join("cmp");
    let (_, cmp) = compare(&cfg, Some(&out), None).unwrap();
    assert!(!cmp.fields.is_empty());
    for row in &cmp.fields {
        assert!(row.psi_distance < 1e-12, "t = {}: {}", row.t, row.psi_distance);
    }
    for row in &cmp.displacement {
        assert!(row.max < 1e-9, "t = {}: {}", row.t, row.max);
    }
    load_bundle(&out.join("standard")).unwrap();
    load_bundle(&out.join("modified")).unwrap();
    assert!(out.join("comparison.csv").is_file());
    assert!(out.join("displacement.csv").is_file());
}

#[test]
fn identity_suite_passes_in_both_conventions() {
    let opts = IdentityOptions::default();
    let exact = identities(&opts).unwrap();
    assert_eq!(exact.failed(), 0);
    assert_eq!(exact.get("chain_rule_exact").unwrap().status, Status::Pass);
    assert!(exact.get("chain_rule_as_printed").is_none());

    let printed = identities(&IdentityOptions {
        convention: Convention::AsPrinted,
        ..opts
    })
    .unwrap();
    assert_eq!(printed.failed(), 0);
    assert_eq!(printed.get("chain_rule_as_printed").unwrap().status, Status::Info);

    let direct = identities(&IdentityOptions {
        qbar_mode: QbarMode::Direct,
        ..opts
    })
    .unwrap();
    assert_eq!(direct.get("qbar_antisymmetry").unwrap().status, Status::Info);
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &base());
    let out = tmp.path().join("run");

    let ok = binary()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));

    let report = binary().arg("report").arg(&out).status().unwrap();
    assert_eq!(report.code(), Some(0));
    assert!(out.join("report").join("norm_series.csv").is_file());

    let missing = binary().arg("report").arg(tmp.path().join("nope")).status().unwrap();
    assert_eq!(missing.code(), Some(2));

    let mut bad = base();
    bad["stepping"]["bogus"] = json!(1);
    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, bad.to_string()).unwrap();
    let rejected = binary().args(["simulate", "--config"]).arg(&bad_cfg).status().unwrap();
    assert_eq!(rejected.code(), Some(2));

    let ids = binary()
        .args(["check-identities", "--convention", "as-printed"])
        .output()
        .unwrap();
    assert_eq!(ids.status.code(), Some(0));
    // quiet mode prints failures only
    assert!(ids.stdout.is_empty());

    // too coarse for the gradient tolerance
    let coarse = binary().args(["check-identities", "--points", "256"]).output().unwrap();
    assert_eq!(coarse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&coarse.stdout).contains("[FAIL] gradient_extra_term"));

    // a stiff well in modified mode drives psi out of the functional box
    let mut blow = with_functional(base());
    blow["potential"] = json!({ "kind": "harmonic", "stiffness": 5.0, "center": 0.0 });
    blow["stepping"]["mode"] = json!("modified");
    blow["stepping"]["t_end"] = json!(3.0);
    let blow_cfg = tmp.path().join("blow.json");
    fs::write(&blow_cfg, blow.to_string()).unwrap();
    let failed = binary()
        .args(["simulate", "--config"])
        .arg(&blow_cfg)
        .arg("--out")
        .arg(tmp.path().join("blow"))
        .output()
        .unwrap();
    assert_eq!(failed.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("functional box"));

    let usage = binary().arg("no-such-command").status().unwrap();
    assert_eq!(usage.code(), Some(2));
}
