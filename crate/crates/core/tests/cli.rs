use std::path::Path;
use std::process::{Command, Output};

fn homoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homoflow"))
        .args(args)
        .env_remove("HOMOFLOW_JOBS")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_for_every_subcommand() {
    for sub in [
        "simulate",
        "threshold",
        "critical-profile",
        "analyze",
        "plot",
        "sweep",
    ] {
        let out = homoflow(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    assert_eq!(homoflow(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        homoflow(&["threshold", "--m", "1.2", "--p-max", "3", "--bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(homoflow(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(homoflow(&[]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = homoflow(&[
        "simulate",
        "--config",
        "/nonexistent/run.toml",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn threshold_table_output() {
    let out = homoflow(&["threshold", "--m", "1.2", "--p-max", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.500000000"), "{text}");
    assert!(text.contains("0.348365227"), "{text}");
    let again = homoflow(&["threshold", "--m", "1.2", "--p-max", "4"]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn critical_profile_regimes() {
    let ok = homoflow(&[
        "critical-profile",
        "--m",
        "1.5",
        "--p",
        "4",
        "--alpha",
        "1.0",
        "--chi",
        "0.1",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "i,x");
    assert_eq!(rows.len(), 5, "{text}");
    let none = homoflow(&[
        "critical-profile",
        "--m",
        "1.5",
        "--p",
        "4",
        "--alpha",
        "0",
        "--chi",
        "0.1",
    ]);
    assert_eq!(none.status.code(), Some(3));
}

#[test]
fn simulate_analyze_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = homoflow(&[
            "simulate",
            "--config",
            &config("subcritical.toml"),
            "--out",
            path(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["diagnostics.csv", "snapshots.csv", "summary.json"] {
        let a = std::fs::read(out_a.join(f)).unwrap();
        let b = std::fs::read(out_b.join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"]["type"], "completed");

    let snaps = out_a.join("snapshots.csv");
    let o = homoflow(&["analyze", "--snapshots", path(&snaps)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out_a.join("analysis.json").exists());

    for kind in ["energy_vs_t", "moment_vs_t", "worldlines", "density_hist"] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let o = homoflow(&[
            "plot",
            "--snapshots",
            path(&snaps),
            "--kind",
            kind,
            "--out",
            path(&svg),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{kind}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<?xml") && text.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn sweep_classifies_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = homoflow(&[
        "sweep",
        "--config",
        &config("subcritical.toml"),
        "--param",
        "chi",
        "--values",
        "0.05,0.5",
        "--jobs",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let phase = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let lines: Vec<&str> = phase.lines().collect();
    assert_eq!(lines[0], "chi,termination,T_estimate,max_f2,t_max_f2");
    assert!(lines[1].starts_with("0.05,completed"), "{phase}");
    assert!(lines[2].starts_with("0.5,blowup"), "{phase}");
    assert!(dir.path().join("summary_000.json").exists());
    assert!(dir.path().join("summary_001.json").exists());
}
