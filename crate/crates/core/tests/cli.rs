use std::path::Path;
use std::process::Command;

use anderson_lab::cli::{CommandKind, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anderson-lab"))
}

fn read_tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn ensemble_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = RunConfig::for_command(CommandKind::Ensemble);
    cfg.side = 16;
    cfg.realizations = 5;
    cfg.seed = 11;
    cfg.entries = vec![vec![0, 0], vec![0, 1]];
    cfg.weight_scales = vec![2.0];
    cfg.plot = false;
    let path = dir.join("ensemble.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

#[test]
fn replay_without_manifest_is_a_usage_error() {
    let out = bin().arg("replay").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--manifest"));
}

#[test]
fn bad_side_is_rejected_with_message() {
    let out = bin().args(["resolve", "--L", "15"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("L must be a positive even integer"));
}

#[test]
fn ensemble_tables_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ensemble_config(tmp.path());
    let mut dirs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(format!("t{threads}"));
        let status = bin()
            .args(["--threads", threads, "ensemble", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&dir)
            .status()
            .unwrap();
        assert!(status.success());
        dirs.push(dir);
    }
    let a = read_tables(&dirs[0]);
    assert!(a.iter().any(|(n, _)| n == "observables.csv"));
    assert_eq!(a, read_tables(&dirs[1]));

    let again = tmp.path().join("replayed");
    let status = bin().arg("replay").arg("--manifest").arg(dirs[0].join("manifest.json")).arg("--out").arg(&again).status().unwrap();
    assert!(status.success());
    assert_eq!(a, read_tables(&again));
}

#[test]
fn tampered_manifest_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ensemble_config(tmp.path());
    let dir = tmp.path().join("run");
    assert!(bin().args(["ensemble", "--config"]).arg(&config).arg("--out").arg(&dir).status().unwrap().success());
    let manifest = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest).unwrap().replace("\"seed\": 11", "\"seed\": 12");
    std::fs::write(&manifest, text).unwrap();
    let out = bin().arg("replay").arg("--manifest").arg(&manifest).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
