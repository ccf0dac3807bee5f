//! End-to-end runs of the `noknow` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn noknow(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_noknow"));
    cmd.args(args).env_remove("NOKNOW_OUT_DIR");
    if let Some(p) = out_env {
        cmd.env("NOKNOW_OUT_DIR", p);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Data rows (no metadata) of a CSV output.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let j = header.split(',').position(|c| c == name).unwrap();
    rows(path).iter().map(|r| r[j].parse().unwrap()).collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment": "ensemble", "n_traj": 130, "t_final": 0.5}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = noknow(
        &[
            "ensemble",
            "--config",
            &cfg,
            "--out",
            a.to_str().unwrap(),
            "--threads",
            "1",
        ],
        None,
    );
    let rb = noknow(
        &[
            "ensemble",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "3",
        ],
        None,
    );
    assert!(ra.status.success() && rb.status.success());
    let fa = std::fs::read(a.join("ensemble.csv")).unwrap();
    let fb = std::fs::read(b.join("ensemble.csv")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"seed": 3, "t_final": 0.05}"#);
    let out = dir.path().join("o");
    let r = noknow(
        &[
            "trajectory",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.lines().any(|l| l == "# seed: 11"));
    assert!(text.contains("\"seed\":11"));
}

#[test]
fn output_directory_precedence() {
    let dir = TempDir::new().unwrap();
    let env_dir = dir.path().join("env");
    let cfg_dir = dir.path().join("cfg");
    let flag_dir = dir.path().join("flag");
    let plain = write(dir.path(), "p.json", r#"{"t_final": 0.01, "format": "json-lines"}"#);
    let with_dir = write(
        dir.path(),
        "d.json",
        &format!(r#"{{"t_final": 0.01, "out_dir": {:?}}}"#, cfg_dir.to_str().unwrap()),
    );
    assert!(noknow(&["trajectory", "--config", &plain], Some(&env_dir))
        .status
        .success());
    assert!(env_dir.join("trajectory.jsonl").exists());
    assert!(noknow(&["trajectory", "--config", &with_dir], Some(&env_dir))
        .status
        .success());
    assert!(cfg_dir.join("trajectory.csv").exists());
    let flag = flag_dir.to_str().unwrap();
    assert!(
        noknow(&["trajectory", "--config", &with_dir, "--out", flag], Some(&env_dir))
            .status
            .success()
    );
    assert!(flag_dir.join("trajectory.csv").exists());
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let bad = write(dir.path(), "bad.json", "{\n  \"eta\": 1.5,\n  \"colour\": 1\n}");
    let r = noknow(&["trajectory", "--config", &bad, "--out", out], None);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.starts_with("error[config]"), "{err}");
    assert!(err.contains("[0, 1]") && err.contains("colour"), "{err}");

    let syntax = write(dir.path(), "syntax.json", "{\n  \"eta\": ,\n}");
    let r = noknow(&["trajectory", "--config", &syntax, "--out", out], None);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));

    let r = noknow(&["no-such-experiment", "--config", &syntax, "--out", out], None);
    assert_eq!(r.status.code(), Some(2));

    // 2^(2·7) > 4096: the steady-state solver refuses the dimension.
    let big = write(dir.path(), "big.json", r#"{"n_min": 7, "n_max": 7}"#);
    let r = noknow(&["dqc-scan", "--config", &big, "--out", out], None);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error[resource]"));

    let missing = dir.path().join("absent.json");
    let r = noknow(
        &["trajectory", "--config", missing.to_str().unwrap(), "--out", out],
        None,
    );
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn feedback_cancel_keeps_purity() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment": "feedback-cancel", "omega": 1.0, "gamma": 1.0}"#,
    );
    let out = dir.path().join("o");
    let r = noknow(
        &["feedback-cancel", "--config", &cfg, "--out", out.to_str().unwrap()],
        None,
    );
    assert!(r.status.success());
    let purity = column(&out.join("feedback-cancel.csv"), "purity");
    assert_eq!(purity.len(), 501);
    assert!(purity.iter().all(|p| (p - 1.0).abs() <= 1e-6));
}

#[test]
fn filter_distance_stays_constant_on_uninformative_quadrature() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"n_traj": 4, "record_stride": 100}"#);
    let out = dir.path().join("o");
    let r = noknow(
        &["filter-divergence", "--config", &cfg, "--out", out.to_str().unwrap()],
        None,
    );
    assert!(r.status.success());
    let path = out.join("filter-divergence.csv");
    let streams = column(&path, "stream_index");
    let dist = column(&path, "distance");
    let dt = 1e-3;
    for s in 0..4 {
        let d: Vec<f64> = streams
            .iter()
            .zip(&dist)
            .filter(|(i, _)| **i == s as f64)
            .map(|(_, d)| *d)
            .collect();
        assert_eq!(d.len(), 51);
        assert!(d.iter().all(|x| (x - d[0]).abs() <= 10.0 * dt), "stream {s}: {d:?}");
    }
}
