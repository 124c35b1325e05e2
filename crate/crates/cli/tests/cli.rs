use std::path::Path;
use std::process::{Command, Output};

fn gibbs_lsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbs-lsi"))
        .args(args)
        .env("GIBBS_LSI_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(gibbs_lsi(&[]).status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(gibbs_lsi(&["sample", "--bogus", "1"]).status.code(), Some(2));
}

#[test]
fn p_six_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&["sample", "--p", "6", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must satisfy"));
}

#[test]
fn sigma_at_threshold_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&["hessian-of-v", "--p", "5", "--sigma", "3.5", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_number_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&["sample", "--K", "one", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = gibbs_lsi(&["sample", "--N", "8", "--samples", "300", "--seed", "11", "--out", &out_arg(dir.path())]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["sample.csv", "sample.jsonl", "samples.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = Command::new(env!("CARGO_BIN_EXE_gibbs-lsi"))
            .args(["bd-transfer", "--N", "2", "--samples", "500", "--seed", "3", "--format", "csv"])
            .args(["--out", &out_arg(dir.path())])
            .env("GIBBS_LSI_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let x = std::fs::read(a.path().join("bd-transfer.csv")).unwrap();
    let y = std::fs::read(b.path().join("bd-transfer.csv")).unwrap();
    assert_eq!(x, y);
    assert!(!a.path().join("bd-transfer.jsonl").exists());
}

#[test]
fn blowup_scan_writes_one_estimate_per_level_and_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&[
        "blowup-scan", "--p", "5", "--K", "1", "--M", "1,2,4,8", "--seed", "7",
        "--samples", "4000", "--chain_steps", "100", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("blowup-scan.csv")).unwrap();
    let estimates: Vec<_> = csv.lines().filter(|l| l.starts_with("blowup-scan,estimate,")).collect();
    assert_eq!(estimates.len(), 4);
    let jsonl = std::fs::read_to_string(dir.path().join("blowup-scan.jsonl")).unwrap();
    let slopes: Vec<serde_json::Value> = jsonl
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v.get("fit").is_some_and(|f| f["quantity"] == "estimate"))
        .collect();
    assert_eq!(slopes.len(), 1);
    assert!(slopes[0]["fit"]["slope"].is_f64());
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = gibbs_lsi(&["sample", "--N", "4", "--samples", "50", "--K", "2.5", "--out", &out_arg(&first)]);
    assert_eq!(out.status.code(), Some(0));
    let echo = first.join("config.txt");
    let second = dir.path().join("second");
    let out = gibbs_lsi(&["sample", "--config", echo.to_str().unwrap(), "--out", &out_arg(&second)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read_to_string(echo).unwrap();
    let b = std::fs::read_to_string(second.join("config.txt")).unwrap();
    assert_eq!(a.replace(&out_arg(&first), "OUT"), b.replace(&out_arg(&second), "OUT"));
    assert_eq!(
        std::fs::read(first.join("sample.csv")).unwrap(),
        std::fs::read(second.join("sample.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nN = 4\nsamples = 20\nseed = 5\n").unwrap();
    let out = gibbs_lsi(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let echo = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(echo.lines().any(|l| l == "seed = 9"));
    assert!(echo.lines().any(|l| l == "N = 4"));
}

#[test]
fn convexity_scan_log_sobolev_bound_is_at_most_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&["convexity-scan", "--p", "3", "--samples", "20", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convexity-scan.csv")).unwrap();
    let bound: f64 = csv
        .lines()
        .find(|l| l.starts_with("convexity-scan,ls_bound,"))
        .and_then(|l| l.split(',').nth(3))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!(bound > 0.0 && bound <= 2.0, "{bound}");
}

#[test]
fn lsi_bracket_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_lsi(&["lsi-bracket", "--cutoff", "none", "--focusing", "false", "--Lambda", "0", "--n_r", "120", "--n_theta", "32", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("lsi-bracket.csv")).unwrap();
    let get = |q: &str| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(&format!("lsi-bracket,{q},")))
            .and_then(|l| l.split(',').nth(3))
            .and_then(|v| v.parse().ok())
            .unwrap()
    };
    assert!(get("lower") <= get("upper") * (1.0 + 1e-3));
    assert!((get("upper") - 2.0).abs() < 1e-9);
}
