//! End-to-end checks of the `msqkd` binary: exit codes, output formats,
//! and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn msqkd_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_msqkd"));
    cmd.current_dir(dir).args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn threshold_semi_honest_prints_six_decimals() {
    let out = msqkd(&["threshold", "--scenario", "semi-honest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let line = text.trim();
    assert!(line.starts_with("0.1601"), "got '{line}'");
    assert_eq!(line.len(), 8, "six decimals expected, got '{line}'");
}

#[test]
fn threshold_untrusted_runs() {
    let out = msqkd(&["threshold", "--scenario", "untrusted"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).trim().starts_with("0.12"));
}

#[test]
fn keyrate_zero_noise_is_one() {
    for scenario in ["semi-honest", "untrusted"] {
        let out = msqkd(&["keyrate", "--scenario", scenario, "--noise", "0,0,0"]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout(&out).trim(), "1.000000");
    }
}

#[test]
fn keyrate_single_noise_value_expands() {
    let triple = msqkd(&[
        "keyrate",
        "--scenario",
        "semi-honest",
        "--noise",
        "0.1,0.1,0.1",
    ]);
    let single = msqkd(&["keyrate", "--scenario", "semi-honest", "--noise", "0.1"]);
    assert_eq!(stdout(&triple), stdout(&single));
}

#[test]
fn keyrate_flag_conflicts_are_usage_errors() {
    let out = msqkd(&["keyrate", "--scenario", "semi-honest"]);
    assert_eq!(out.status.code(), Some(1));
    let out = msqkd(&[
        "keyrate",
        "--scenario",
        "semi-honest",
        "--noise",
        "0.1",
        "--stats",
        "x.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inadmissible_noise_is_domain_error() {
    let out = msqkd(&[
        "keyrate",
        "--scenario",
        "semi-honest",
        "--noise",
        "0.7,0.7,0.7",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn simulate_zero_rounds_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = msqkd_in(
        dir.path(),
        &[
            "simulate",
            "--parties",
            "2",
            "--rounds",
            "0",
            "--noise",
            "0",
            "--out",
            "t.csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_rejected() {
    let out = msqkd(&["threshold", "--scenario", "semi-honest", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero_everywhere() {
    for sub in [
        "simulate",
        "keyrate",
        "threshold",
        "sweep",
        "exact",
        "metrics",
    ] {
        let out = msqkd(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        assert!(!stdout(&out).is_empty());
    }
    assert_eq!(msqkd(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_csv_format_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--scenario",
        "semi-honest",
        "--from",
        "0",
        "--to",
        "0.2",
        "--steps",
        "3",
        "--out",
        "curve.csv",
    ];
    let out = msqkd_in(dir.path(), &args, &[]);
    assert_eq!(out.status.code(), Some(0));
    let first = fs::read(dir.path().join("curve.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4); // header + 3 points
    assert_eq!(lines[0], "q,rate,scenario");
    assert_eq!(lines[1], "0.000000,1.000000,semi-honest");
    assert!(text.ends_with('\n'));
    // Rerun: byte-identical.
    let out = msqkd_in(dir.path(), &args, &[]);
    assert_eq!(out.status.code(), Some(0));
    let second = fs::read(dir.path().join("curve.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn sweep_range_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = msqkd_in(
        dir.path(),
        &[
            "sweep",
            "--scenario",
            "untrusted",
            "--from",
            "0",
            "--to",
            "0",
            "--steps",
            "5",
            "--out",
            "c.csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_deterministic_and_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--parties",
        "2",
        "--rounds",
        "20000",
        "--noise",
        "0.1",
        "--seed",
        "7",
        "--out",
        "log.csv",
    ];
    let a = msqkd_in(dir.path(), &args, &[]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let log_a = fs::read(dir.path().join("log.csv")).unwrap();
    let b = msqkd_in(dir.path(), &args, &[("SQKD_THREADS", "4")]);
    assert_eq!(b.status.code(), Some(0));
    let log_b = fs::read(dir.path().join("log.csv")).unwrap();
    assert_eq!(
        log_a, log_b,
        "trial log must not depend on the thread count"
    );
    assert_eq!(
        stdout(&a),
        stdout(&b),
        "statistics must not depend on the thread count"
    );

    // The statistics JSON parses back and carries the expected tables.
    let stats: msqkd::SiftedStatistics = serde_json::from_str(stdout(&a).trim()).unwrap();
    assert_eq!(stats.parties, 2);
    assert!(stats.p_c.is_some());
    assert!((stats.noise.q - 0.1).abs() < 0.02);
}

#[test]
fn simulate_no_case2_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // With one round the all-measure case is usually missing; find a seed
    // deterministically whose single round is not all-measure-accepted.
    for seed in 0..100u64 {
        let out = msqkd_in(
            dir.path(),
            &[
                "simulate",
                "--parties",
                "2",
                "--rounds",
                "1",
                "--noise",
                "0",
                "--seed",
                &seed.to_string(),
                "--out",
                "one.csv",
            ],
            &[],
        );
        match out.status.code() {
            Some(3) => return,
            Some(0) => continue,
            other => panic!("unexpected exit {other:?}"),
        }
    }
    panic!("no seed produced a key-less run");
}

#[test]
fn exact_identity_attack_stats() {
    let dir = tempfile::tempdir().unwrap();
    let attack = msqkd::attacks::identity_attack(1);
    let json = msqkd::attacks::collective_attack_to_json(&attack).to_string();
    fs::write(dir.path().join("identity.json"), json).unwrap();
    let out = msqkd_in(
        dir.path(),
        &["exact", "--attack", "identity.json", "--keyrate"],
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((v["statistics"]["reflect_bell"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["keyrate"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn exact_honest_untrusted_attack() {
    let dir = tempfile::tempdir().unwrap();
    let attack = msqkd::attacks::honest_source();
    let json = msqkd::attacks::untrusted_attack_to_json(&attack).to_string();
    fs::write(dir.path().join("honest.json"), json).unwrap();
    let out = msqkd_in(
        dir.path(),
        &["exact", "--attack", "honest.json", "--keyrate"],
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((v["statistics"]["q"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["keyrate"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn exact_rejects_stochastic_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("noise.json"),
        r#"{"type":"stochastic","noise":{"q":0.1,"qm":0.1,"qr":0.1}}"#,
    )
    .unwrap();
    let out = msqkd_in(dir.path(), &["exact", "--attack", "noise.json"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_rejects_invalid_unitary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"type":"collective","ancilla_dim":1,
            "U1":[[[1.5,0],[0,0]],[[0,0],[1,0]]],
            "U2":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#,
    )
    .unwrap();
    let out = msqkd_in(dir.path(), &["exact", "--attack", "bad.json"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unitary"));
}

#[test]
fn keyrate_from_simulated_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = msqkd_in(
        dir.path(),
        &[
            "simulate",
            "--parties",
            "2",
            "--rounds",
            "200000",
            "--noise",
            "0.05",
            "--seed",
            "11",
            "--out",
            "log.csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    fs::write(dir.path().join("stats.json"), stdout(&out)).unwrap();
    for scenario in ["semi-honest", "untrusted"] {
        let kr = msqkd_in(
            dir.path(),
            &["keyrate", "--scenario", scenario, "--stats", "stats.json"],
            &[],
        );
        assert_eq!(
            kr.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&kr.stderr)
        );
        let rate: f64 = stdout(&kr).trim().parse().unwrap();
        // At 5% injected noise both bounds sit well inside (0, 1).
        assert!(
            rate > 0.2 && rate < 1.0,
            "{scenario} rate from stats: {rate}"
        );
    }
}

#[test]
fn metrics_output() {
    let out = msqkd(&["metrics", "--parties", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("1/12"));
    assert!(text.contains("12"));
    assert!(text.contains("this-protocol"));
    let csv = msqkd(&["metrics", "--parties", "3", "--csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout(&csv);
    assert!(text.lines().count() == 8); // header + 7 rows
    assert!(text.contains("ref-25,13.04,1/24,32,false"));

    let bad = msqkd(&["metrics", "--parties", "1"]);
    assert_eq!(bad.status.code(), Some(1));
}
