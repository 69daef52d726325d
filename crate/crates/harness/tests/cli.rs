use std::path::Path;
use std::process::Command;

use manoma::experiments::{read_csv, schema, IndicatorTrial, OrderTrial, SchemeTrial, SummaryRow, SweepRow};

fn manoma(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_manoma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn payload_without_clock(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["report"]["wall_clock_s"] = serde_json::Value::Null;
    v
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nnum_users = 2\nnum_antennas = 2\n[ga]\ngenerations = 20\n");
    let mut payloads = Vec::new();
    for n in 0..2 {
        let out = dir.path().join(format!("r{n}"));
        let o = manoma(&["run", "--config", &cfg, "--seed", "42", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        payloads.push(payload_without_clock(&out.join("run_seed42.json")));
    }
    assert_eq!(payloads[0], payloads[1]);
    assert!(payloads[0]["report"]["sum_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nnum_antennas = 60\n");
    let o = manoma(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("num_antennas") && err.contains("packing bound"), "{err}");

    let cfg = write_config(dir.path(), "[system]\nmax_power = \"10 dBW\"\n");
    let o = manoma(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_power"));

    let o = manoma(&["sweep", "--axis", "Q"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(dir.path(), "[system]\nnum_users = 6\n");
    let o = manoma(&["compare-orders", "--config", &cfg, "--trials", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at most 5 users"));
}

#[test]
fn conic_dump_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nnum_users = 2\nnum_antennas = 2\n[ga]\ngenerations = 5\n");
    let out = dir.path().join("d");
    let o = manoma(&["run", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap(), "--debug-dump-conic"]);
    assert!(o.status.success());
    let dump = std::fs::read_to_string(out.join("conic_seed3.txt")).unwrap();
    assert!(!dump.trim().is_empty());
}

#[test]
fn sweep_csv_schema_and_means() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nnum_users = 2\n[ga]\ngenerations = 10\npopulation = 20\n");
    let out = dir.path().join("s");
    let o = manoma(&[
        "sweep", "--config", &cfg, "--axis", "M", "--values", "1,2", "--schemes", "NOMA-MA,SDMA-FPA",
        "--trials", "3", "--seed", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<SweepRow> = read_csv(&out.join("sweep_M.csv"), &schema::SWEEP).unwrap();
    let trials: Vec<SchemeTrial> = read_csv(&out.join("sweep_M_trials.csv"), &schema::SWEEP_TRIALS).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(trials.len(), 12);
    for r in &rows {
        assert_eq!(r.trials + r.dropped, 3);
        let rates: Vec<f64> = trials
            .iter()
            .filter(|t| t.value == r.value && t.scheme == r.scheme)
            .filter_map(|t| t.sum_rate)
            .collect();
        assert_eq!(rates.len(), r.trials);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!((mean - r.mean_sum_rate).abs() <= 1e-9 * mean.abs().max(1.0), "{r:?}");
    }
}

#[test]
fn comparisons_at_one_user_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nnum_users = 1\nnum_antennas = 2\n");
    let out = dir.path().join("c");
    for sub in ["compare-orders", "compare-indicators"] {
        let o = manoma(&[sub, "--config", &cfg, "--trials", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let orders: Vec<OrderTrial> = read_csv(&out.join("orders.csv"), &schema::ORDERS).unwrap();
    let indicators: Vec<IndicatorTrial> = read_csv(&out.join("indicators.csv"), &schema::INDICATORS).unwrap();
    assert_eq!(orders.len(), 3);
    for r in &orders {
        let p = r.proposed.unwrap();
        assert!((r.exhaustive.unwrap() - p).abs() < 1e-9 && (r.random.unwrap() - p).abs() < 1e-9, "{r:?}");
    }
    for r in &indicators {
        let p = r.proposed.unwrap();
        assert!((r.exhaustive.unwrap() - p).abs() < 1e-9, "{r:?}");
        assert!((r.fixed.unwrap() - p).abs() < 1e-6 * p, "{r:?}");
    }
    for stem in ["orders_summary.csv", "indicators_summary.csv"] {
        let s: Vec<SummaryRow> = read_csv(&out.join(stem), &schema::SUMMARY).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|r| r.trials == 3 && r.dropped == 0));
    }
}

#[test]
fn verify_passes_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = manoma(&["verify", "--seed", "1", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert!(v.as_array().is_some_and(|a| a.len() >= 8));
}
