use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau-hydro"))
}

fn sweep(out: &std::path::Path, extra: &[&str]) -> std::process::Output {
    bin()
        .args([
            "sweep",
            "--eps",
            "0.25,0.2,0.125,0.0625",
            "--t-eval",
            "0.05",
            "--fan-cells",
            "8",
            "--samples",
            "2",
            "--constant-transport",
            "2.4,5.25",
            "--out",
        ])
        .arg(out)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn sweep_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = sweep(&out, &["--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("ok")));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("[fit.maxwellian]") && summary.contains("p_hat = "));
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
    assert_eq!(
        fs::read_to_string(out.join("plot.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "a = 0.75\nk = 0.25\nthreads = 1\n").unwrap();
    let out = dir.path().join("run");
    let o = sweep(&out, &["--config", cfg.to_str().unwrap(), "--k", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("a = 7.5000000000000000e-1"));
    assert!(summary.contains("k = 5.0000000000000000e-1"));
}

#[test]
fn invalid_sweeps_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // increasing eps
    let o = bin()
        .args([
            "sweep",
            "--eps",
            "0.1,0.2,0.05,0.01",
            "--constant-transport",
            "1,1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("decreasing"));
    let o = bin()
        .args([
            "sweep",
            "--a",
            "0.5",
            "--constant-transport",
            "1,1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn wave_report_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["wave-report", "--delta", "0.1", "--times", "0.5,2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let decay = fs::read_to_string(dir.path().join("decay_wave.csv")).unwrap();
    assert!(decay.starts_with("t,p,j,value,bound_shape,ratio"));
    // 2 times x 3 norms x 2 orders
    assert_eq!(decay.lines().count(), 13);
    let gap = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert_eq!(gap.lines().count(), 3);
}

#[test]
fn transport_table_reuses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let args = [
        "transport-table",
        "--n",
        "12",
        "--l",
        "6",
        "--thetas",
        "1,1.5",
        "--tol",
        "1e-5",
        "--out",
    ];
    let first = bin().args(args).arg(&path).output().unwrap();
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let stdout = String::from_utf8_lossy(&first.stdout).to_string();
    assert_eq!(stdout.lines().count(), 3);
    let cached = fs::read(&path).unwrap();
    let second = bin().args(args).arg(&path).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&second.stdout), stdout);
    assert_eq!(fs::read(&path).unwrap(), cached);
}
