use std::fs;
use std::process::Command;

fn momlim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momlim"))
}

#[test]
fn run_writes_trajectory_csv_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    let out = dir.path().join("traj.csv");
    fs::write(
        &config,
        "# small run\nmu = 1\nG = 10\nbeta = 0.9\neta = 0.5\nschedule = poly:1\nT = 1e3\nrecord = final\n",
    )
    .unwrap();
    let status = momlim()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,theta,f_gap,eta_t"));
    assert!(lines.any(|l| l.starts_with("1000,")));
}

#[test]
fn malformed_config_exits_with_config_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    fs::write(&config, "mu = 1\nbeta = 1.5\nbogus = 3\n").unwrap();
    let output = momlim().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn unstable_table_request_is_refused() {
    let output = momlim()
        .args(["table1", "--beta", "0.9", "--eta", "100", "--T", "1e3"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn stability_reports_window() {
    let output = momlim()
        .args(["stability", "--mu", "1", "--beta", "0.9", "--eta", "0.5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut lines = stdout.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "window_high").unwrap();
    // upper edge 2 (1 + beta) / (mu (1 - beta)) = 38
    let edge: f64 = row[col].parse().unwrap();
    assert!((edge - 38.0).abs() < 1e-12, "{stdout}");
    assert_eq!(row[header.iter().position(|h| *h == "stable").unwrap()], "true");
}

#[test]
fn audit_exit_code_reflects_stated_violations() {
    let output = momlim().args(["audit", "--samples", "50", "--seed", "1"]).output().unwrap();
    // stated forms fail on some samples while corrected forms hold everywhere
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("kind,lemma"));
}
