//! End-to-end runs of the `polyfourier` binary.

use std::path::Path;
use std::process::{Command, Output};

use polyfourier::expsum::bound_report;
use polyfourier::holder::spectrum_bounds;
use polyfourier_cli::manifest::{sha256_hex, RunManifest};

fn polyfourier(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyfourier"))
        .args(args)
        .env_remove("POLYFOURIER_THREADS")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().expect("utf-8 path").to_string()
}

fn error_kind(out: &Output) -> String {
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    err["error"].as_str().expect("error kind").to_string()
}

#[test]
fn expsum_matches_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyfourier(&[
        "--out",
        &out_arg(dir.path()),
        "expsum",
        "--poly",
        "n^3+n",
        "--q",
        "11",
        "--all-a",
        "--all-m",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(dir.path().join("expsum.csv")).unwrap();
    let expected = bound_report(&"n^3+n".parse().unwrap(), &[11], 0..11, 0..11)
        .unwrap()
        .to_csv()
        .to_csv();
    assert_eq!(written, expected);
    assert_eq!(written.lines().count(), 1 + 121);
}

#[test]
fn spectrum_matches_library_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyfourier(&["--out", &out_arg(dir.path()), "spectrum", "--k", "2", "--nu0", "2", "--grid", "64"]);
    assert!(out.status.success());
    let written = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(written, spectrum_bounds(2, 2, 64).unwrap().to_csv().to_csv());
}

#[test]
fn empty_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.toml");
    std::fs::write(&config, "").unwrap();
    let out = polyfourier(&["--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = polyfourier(&["verify", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn verify_gauss_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyfourier(&["--out", &out_arg(dir.path()), "verify", "gauss"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report[0]["name"], "gauss");
    assert_eq!(report[0]["pass"], true);
}

#[test]
fn config_file_runs_its_command() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let out_dir = dir.path().join("run");
    std::fs::write(
        &config,
        format!(
            "command = \"spectrum\"\nout = {:?}\n\n[spectrum]\nk = 3\nnu0 = 2\ngrid = 16\n",
            out_arg(&out_dir)
        ),
    )
    .unwrap();
    let out = polyfourier(&["--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(out_dir.join("spectrum.csv")).unwrap();
    assert_eq!(written, spectrum_bounds(3, 2, 16).unwrap().to_csv().to_csv());
}

#[test]
fn manifest_digests_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = polyfourier(&[
        "--out",
        &out_arg(&first),
        "--threads",
        "3",
        "turan",
        "--lambdas",
        "1,-3,7",
        "--q",
        "101",
        "--lo",
        "0.1",
        "--hi",
        "0.5",
    ]);
    assert!(out.status.success());
    let manifest = RunManifest::load(&first.join("manifest.json")).unwrap();
    assert!(!manifest.partial);
    assert_eq!(manifest.threads, 3);
    for d in &manifest.outputs {
        assert_eq!(d.sha256, sha256_hex(&std::fs::read(first.join(&d.file)).unwrap()));
    }
    let second = dir.path().join("second");
    let out = polyfourier(&["--out", &out_arg(&second), "replay", first.join("manifest.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_polyfourier"))
        .args(["--out", &out_arg(dir.path()), "--threads", "2", "spectrum", "--k", "2"])
        .env("POLYFOURIER_THREADS", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(RunManifest::load(&dir.path().join("manifest.json")).unwrap().threads, 5);
}

#[test]
fn resource_errors_flag_a_partial_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyfourier(&[
        "--out",
        &out_arg(dir.path()),
        "series",
        "--base",
        "1/3",
        "--h",
        "1e-3",
        "--tol",
        "1e-16",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "resource");
    let manifest = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
    assert!(manifest.partial && manifest.error.is_some());
}

#[test]
fn domain_errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyfourier(&["--out", &out_arg(dir.path()), "spectrum", "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "domain");
}
