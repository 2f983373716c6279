use std::process::{Command, Output};

use secure_ntt::campaign::Report;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secure-ntt"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_report_and_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let p = path.to_str().unwrap();
    let o = cli(&[
        "run",
        "--samples",
        "1",
        "--seed",
        "5",
        "--preset",
        "scaled",
        "--out",
        p,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("KeyGen"));

    let saved = std::fs::read_to_string(&path).unwrap();
    let r = Report::from_json(&saved).unwrap();
    assert_eq!(r.totals.runs, 17);
    assert_eq!(r.seed, 5);

    let json = cli(&["report", p, "--format", "json"]);
    assert_eq!(json.status.code(), Some(0));
    assert_eq!(stdout(&json), saved);
    let table = cli(&["report", p]);
    assert!(stdout(&table).contains("Decap"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"samples": 3, "seed": 1, "variants": [768], "m": 2}"#,
    )
    .unwrap();
    let o = cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "1",
        "--thresholds",
        "2,4,2,4",
        "--weights",
        "0.25,0.75",
        "--stuck",
        "1",
        "--mask",
        "per-run",
        "--format",
        "json",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.samples, 1);
    assert_eq!(r.totals.runs, 24);
    assert_eq!(r.config.m, 2);
    assert_eq!(r.config.thresholds.cfi_th_relc, 4);
    assert_eq!(r.config.weights.w_ccc, 0.75);
}

#[test]
fn config_errors_exit_with_one() {
    for args in [
        &["run", "--samples", "0"][..],
        &["run", "--variant", "500"],
        &["run", "--thresholds", "1,2,3"],
        &["run", "--thresholds", "5,4,1,2"],
        &["run", "--weights", "0.9,0.9"],
        &["run", "--stuck", "2"],
        &["run", "--mask", "sometimes"],
        &["run", "--config", "/nonexistent/cfg.json"],
        &["report", "/nonexistent/report.json"],
        &["ntt", "--n", "12", "--q", "17"],
        &["inject", "--r-t", "5000", "--signal", "rd_en"],
        &["bogus"],
    ] {
        let o = cli(args);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn ntt_engines_agree() {
    let golden = cli(&[
        "ntt",
        "--n",
        "8",
        "--q",
        "17",
        "--coeffs",
        "1,2,3,4,5,6,7,8",
        "--engine",
        "golden",
    ]);
    let piped = cli(&[
        "ntt",
        "--n",
        "8",
        "--q",
        "17",
        "--coeffs",
        "1,2,3,4,5,6,7,8",
    ]);
    assert_eq!(golden.status.code(), Some(0));
    let g: serde_json::Value = serde_json::from_str(&stdout(&golden)).unwrap();
    let p: serde_json::Value = serde_json::from_str(&stdout(&piped)).unwrap();
    assert_eq!(g["output"], p["output"]);
    assert_eq!(p["cycles"], 16);
    // a constant polynomial transforms to a constant vector
    let c = cli(&[
        "ntt", "--n", "4", "--q", "17", "--coeffs", "9,0,0,0", "--engine", "golden",
    ]);
    let c: serde_json::Value = serde_json::from_str(&stdout(&c)).unwrap();
    assert_eq!(c["output"], serde_json::json!([9, 9, 9, 9]));
}

#[test]
fn inject_reports_flags_and_trace() {
    let o = cli(&[
        "inject",
        "--r-t",
        "500",
        "--signal",
        "rd_en",
        "--stuck",
        "0",
        "--correct",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = stdout(&o);
    assert!(out.contains("cfi_fault=1"), "{out}");
    assert!(out.contains("measure: repeat"));
    assert!(out.contains("output matches golden: true"));

    let o = cli(&[
        "inject",
        "--n",
        "8",
        "--q",
        "17",
        "--r-t",
        "6",
        "--r-s",
        "1023",
        "--format",
        "json",
        "--full-trace",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["flags"]["cfi_fault"], false);
    assert_eq!(v["trace"].as_array().unwrap().len(), 16);
    assert_eq!(v["matches_golden"], true);
}

#[test]
fn uncorrectable_campaign_exits_with_two() {
    // one slot, a permanent trojan on wr_en and a budget of a single correction
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"samples": 1, "m": 1, "max_corrections": 1,
            "injection": {"rate": 0.0},
            "trojan_profiles": [{"slot": 0, "r_s": 767, "mode": "stuck-at-0"}]}"#,
    )
    .unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.totals.golden_mismatches, 17);
}
