//! End-to-end checks of the command-line surface: JSON/CSV artifact
//! shapes, exit codes and byte-level reproducibility.

use std::fs;
use std::process::Command;

fn rqmap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rqmap"))
}

#[test]
fn entropy_json_on_stdout() {
    let out = rqmap()
        .args(["entropy", "--mu", "-2.5", "--t", "-1.1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["\"value\"", "\"upper_bound\"", "\"method\"", "\"depth\""] {
        assert!(text.contains(key), "missing {key}: {text}");
    }
}

#[test]
fn entropy_accepts_map_coefficients_and_critical_values() {
    // The same unimodal map through both parameterizations.
    for args in [
        ["--a", "-0.75", "--b", "1.0"],
        ["--v1", "2.5", "--v2", "-0.5"],
    ] {
        let out = rqmap().arg("entropy").args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {out:?}");
    }
}

#[test]
fn nonconverged_estimate_exits_three_with_json() {
    // Slowly growing laps at the default depth: the flag is reported and
    // the exit code distinguishes it.
    let out = rqmap()
        .args(["entropy", "--a", "-0.5", "--b", "1.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"converged\": false"), "{text}");
}

#[test]
fn usage_errors_exit_two() {
    let out = rqmap().args(["entropy", "--mu", "-1.0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = rqmap().arg("nonsense").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_parameters_exit_three() {
    let out = rqmap()
        .args(["entropy", "--v1", "2.0", "--v2", "2.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn grid_outside_the_strip_is_all_inadmissible() {
    let dir = std::env::temp_dir().join("rqmap_cli_grid_test");
    fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("empty.csv");
    let out = rqmap()
        .args([
            "grid", "--mu-min", "-0.5", "--mu-max", "-0.1", "--t-min", "-0.5", "--t-max", "-0.1",
            "--nx", "8", "--ny", "8", "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 65);
    for line in csv.lines().skip(1) {
        assert!(
            line.contains(",false,"),
            "unexpected admissible cell: {line}"
        );
    }
}

#[test]
fn grid_artifacts_are_reproducible_byte_for_byte() {
    let dir = std::env::temp_dir().join("rqmap_cli_repro_test");
    fs::create_dir_all(&dir).unwrap();
    let run = |tag: &str, workers: &str| {
        let csv = dir.join(format!("grid_{tag}.csv"));
        let conn = dir.join(format!("conn_{tag}.json"));
        let svg = dir.join(format!("grid_{tag}.svg"));
        let out = rqmap()
            .args([
                "grid",
                "--nx",
                "24",
                "--ny",
                "24",
                "--workers",
                workers,
                "--out",
            ])
            .arg(&csv)
            .arg("--connectivity")
            .arg(&conn)
            .arg("--svg")
            .arg(&svg)
            .args(["--svg-levels", "0.25,0.48"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        (
            fs::read(&csv).unwrap(),
            fs::read(&conn).unwrap(),
            fs::read(&svg).unwrap(),
        )
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(a.0, b.0, "CSV differs across worker counts");
    assert_eq!(a.1, b.1, "connectivity JSON differs");
    assert_eq!(a.2, b.2, "SVG differs");
}

#[test]
fn pcf_scan_reports_positive_quotients() {
    let out = rqmap()
        .args([
            "pcf",
            "--v1-min",
            "1.5",
            "--v1-max",
            "6.0",
            "--v2-min",
            "-0.95",
            "--v2-max",
            "0.95",
            "--n-max",
            "2",
            "--m-max",
            "4",
            "--grid-nx",
            "60",
            "--grid-ny",
            "40",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"quotient\""));
    assert!(
        !text.contains("\"quotient\": -"),
        "negative quotient in {text}"
    );
}

#[test]
fn bones_traces_the_period_two_arc() {
    let out = rqmap()
        .args(["bones", "--n", "2", "--grid-nx", "60", "--grid-ny", "40"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"kind\": \"arc\""), "{text}");
    assert!(text.contains("sigma_two") && text.contains("sigma_minus_six"));
}

#[test]
fn config_file_sets_defaults_but_flags_win() {
    let dir = std::env::temp_dir().join("rqmap_cli_config_test");
    fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("defaults.conf");
    fs::write(&conf, "n_max = 12\n# comment\ntol = 1e-3\n").unwrap();
    let with_config = rqmap()
        .arg("--config")
        .arg(&conf)
        .args(["entropy", "--mu", "-2.5", "--t", "-1.1"])
        .output()
        .unwrap();
    let text = String::from_utf8(with_config.stdout).unwrap();
    assert!(
        text.contains("\"depth\": 12"),
        "config n_max ignored: {text}"
    );
    let with_flag = rqmap()
        .arg("--config")
        .arg(&conf)
        .args(["entropy", "--mu", "-2.5", "--t", "-1.1", "--n-max", "9"])
        .output()
        .unwrap();
    let text = String::from_utf8(with_flag.stdout).unwrap();
    assert!(text.contains("\"depth\": 9"), "flag should win: {text}");
}
