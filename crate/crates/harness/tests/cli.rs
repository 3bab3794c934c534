use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn paranoia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paranoia"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
[game]
name = "stag_hunt"

[agent]
beta = 1.0
p0 = 0.8

[partner]
kind = "explorer"
q_nominal = 0.9
delta = 0.2

[run]
episodes = 120
seeds = 3
"#;

#[test]
fn predict_prints_csv() {
    let out = paranoia(&["predict", "--game", "chicken", "--beta", "0,1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "game,beta,p_star,p_star_beta,p_star_paradox");
    let row: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&row[..3], ["chicken", "1.0", "0.6"]);
    assert!((row[3].parse::<f64>().unwrap() - 0.552).abs() < 1e-12);
}

#[test]
fn simulate_is_reproducible_and_feeds_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = paranoia(&[
            "simulate",
            "--config",
            arg(&cfg),
            "--seed",
            "11",
            "--out",
            arg(out),
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.csv", "runs/seed_0000.csv", "runs/seed_0002.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = paranoia(&["metrics", arg(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(m.starts_with("config_id,beta,pop,poa,final_cooperation,reward_std,episodes_to_criterion"));
    assert_eq!(
        fs::read_to_string(a.join("metrics_runs.csv")).unwrap().lines().count(),
        4
    );
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("sweep");
    let o = paranoia(&[
        "sweep",
        "--config",
        arg(&cfg),
        "--betas",
        "0,1",
        "--param",
        "delta",
        "--values",
        "0.1,0.3",
        "--seeds",
        "2",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("beta_0_noise_0_delta_0.3/summary.csv").is_file());
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 5);
}

#[test]
fn invalid_sweep_point_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("sweep");
    let o = paranoia(&[
        "sweep",
        "--config",
        arg(&cfg),
        "--param",
        "delta",
        "--values",
        "0.1,1.5",
        "--out",
        arg(&out),
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn errors_are_one_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = paranoia(&["simulate", "--config", arg(&missing)]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("level=error msg=\""));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nseeds = 0\n").unwrap();
    let o = paranoia(&["simulate", "--config", arg(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("seeds"));
}

#[test]
fn reproduce_table1_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = paranoia(&["reproduce", "table1", "--out", arg(dir.path())]);
    assert!(o.status.success());
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("check,measured,reference,tolerance,status,note"));
    assert!(!report.contains("FAIL"));
    assert!(!paranoia(&["reproduce", "table7"]).status.success());
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for name in ["gaussian_partner.toml", "explorer_switch.toml"] {
        let out = dir.path().join(name);
        let o = paranoia(&[
            "simulate",
            "--config",
            arg(&root.join(name)),
            "--episodes",
            "40",
            "--seeds",
            "2",
            "--out",
            arg(&out),
        ]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
