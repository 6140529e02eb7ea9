//! End-to-end tests of the `kbm` binary: exit codes, config validation,
//! manifest and table output, and byte-identical reruns across worker counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kbm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn smoke_run_writes_manifest_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbm(
        &["ibp-check", "--T", "2", "--paths", "2000", "--grid", "256", "--seed", "7", "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("run"), "manifest.json")).unwrap();
    assert_eq!(manifest["experiment"], "ibp-check");
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["criteria_passed"], true);
    assert_eq!(manifest["tables"]["ibp_check"], 12);
    let table = String::from_utf8(read(&dir.path().join("run"), "ibp_check.csv")).unwrap();
    assert!(table.starts_with("function,direction,T,"));
    assert_eq!(table.lines().count(), 13);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (label, workers) in [("a", "1"), ("b", "4"), ("c", "16")] {
        let out = kbm(
            &[
                "coupling", "--T", "2", "--paths", "3000", "--grid", "512", "--seed", "11",
                "--u0", "0.3", "--circle", "--threads", workers, "--out", label,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        outputs.push(read(&dir.path().join(label), "coupling.csv"));
    }
    assert_eq!(outputs[0], outputs[1], "1 vs 4 workers differ");
    assert_eq!(outputs[0], outputs[2], "1 vs 16 workers differ");

    // Rerunning the identical invocation reproduces the table bytes too.
    let rerun = kbm(
        &[
            "coupling", "--T", "2", "--paths", "3000", "--grid", "512", "--seed", "11",
            "--u0", "0.3", "--circle", "--threads", "4", "--out", "d",
        ],
        dir.path(),
    );
    assert!(rerun.status.success());
    assert_eq!(outputs[1], read(&dir.path().join("d"), "coupling.csv"));
}

#[test]
fn config_file_drives_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("negmom.toml"),
        "experiment = \"negmom\"\nalpha = 0.25\nout = \"from-config\"\n",
    )
    .unwrap();
    let out = kbm(&["negmom", "--config", "negmom.toml"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table =
        String::from_utf8(read(&dir.path().join("from-config"), "negative_moments.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("0.25,"));

    // The --out flag wins over the config file.
    let out = kbm(&["negmom", "--config", "negmom.toml", "--out", "flag"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("flag/manifest.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "experimnt = \"negmom\"\n").unwrap();
    let out = kbm(&["negmom", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("experimnt"), "stderr: {stderr}");
}

#[test]
fn invalid_field_values_are_rejected_with_the_field_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "alpha = 1.5\n").unwrap();
    let out = kbm(&["negmom", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn mismatched_experiment_id_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), "experiment = \"rates\"\n").unwrap();
    let out = kbm(&["negmom", "--config", "cfg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbm(&["no-such-command"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kbm(&["lln", "--paths", "not-a-number"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violated_tolerance_yields_exit_code_1_and_a_named_check() {
    // An absurdly tight sigma makes the declared lln monotonicity check fail
    // without burning samples.
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("lln.toml"),
        "tolerance_sigma = 1e9\nlambdas = [5.0, 10.0]\npaths = 20\ngrid = 512\nout = \"lln\"\n",
    )
    .unwrap();
    let out = kbm(&["lln", "--config", "lln.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lln"));
    // Tables and the manifest are still written, with the verdict recorded.
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("lln"), "manifest.json")).unwrap();
    assert_eq!(manifest["criteria_passed"], false);
}

#[test]
fn paths_debug_dumps_the_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = kbm(
        &["paths-debug", "--grid", "64", "--T", "2", "--seed", "3", "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success());
    let table = String::from_utf8(read(&dir.path().join("p"), "path.csv")).unwrap();
    assert_eq!(table.lines().count(), 66);
    assert!(table.lines().nth(1).unwrap().starts_with("0,0,0"));
}
