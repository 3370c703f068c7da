use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use upc_sim::emit::format_number;

fn upc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_upc"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Data rows of a CSV file, skipping the comment line.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn efficiency_prints_twelve_digits() {
    let out = run(upc().args([
        "efficiency",
        "--receiver",
        "mf",
        "--alpha",
        "0.25",
        "--point-mass",
        "8",
    ]));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.333333333333");
    let out = run(upc().args([
        "efficiency",
        "--receiver",
        "mmse",
        "--alpha",
        "0.75",
        "--snr",
        "18.215384615384615",
    ]));
    let eta: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((eta - 0.351_351_351_351_351_3).abs() < 1e-11);
    let out = run(upc().args([
        "efficiency",
        "--receiver",
        "de",
        "--alpha",
        "0.25",
        "--snr",
        "1,2",
        "--format",
        "json",
    ]));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["rows"][0][3].as_f64().unwrap(), 0.75);
}

#[test]
fn decorrelator_trace_ends_at_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    run(upc()
        .args(["upc", "run", "--init", "const:0.01", "--config"])
        .arg(config("cell_k8_n32_de.json"))
        .arg("--out")
        .arg(&path));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# receiver=de"));
    let (header, rows) = csv_rows(&text);
    assert_eq!(
        header,
        [
            "iteration",
            "user",
            "power_watts",
            "power_dbw",
            "snr_linear",
            "snr_db",
            "eta",
            "sir_large_system",
            "sir_large_system_db"
        ]
    );
    let last_iteration = &rows.last().unwrap()[0];
    let final_user1 = rows
        .iter()
        .find(|r| &r[0] == last_iteration && r[1] == "1")
        .unwrap();
    let p: f64 = final_user1[2].parse().unwrap();
    let want = 6.4 * 1.6e-14 / (0.75 * 0.1 / 110f64.powi(4));
    assert!((p - want).abs() / want < 1e-6, "{p} vs {want}");
}

#[test]
fn missing_config_names_the_path() {
    let out = upc()
        .args(["upc", "run", "--config", "/no/such/scenario.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["path"], "/no/such/scenario.json");
    assert_eq!(record["error"]["kind"], "io");
}

#[test]
fn invalid_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"num_users": 0, "processing_gain": 4, "noise_power_watts": 1, "target_sir_linear": 1, "receiver": "de", "gains": []}"#).unwrap();
    let out = upc()
        .args(["upc", "run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "config");
}

#[test]
fn stochastic_commands_need_a_seed() {
    for args in [
        vec!["analysis", "table1", "--trials", "10"],
        vec!["baseline", "run", "--symbols", "3"],
    ] {
        let out = upc()
            .args(&args)
            .arg("--config")
            .arg(config("cell_k8_n32_de.json"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn infeasible_scenario_fails_cleanly() {
    // The matched filter cannot reach 6.4 at load 1/4.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mf.json");
    let text = std::fs::read_to_string(config("cell_k8_n32_mf.json"))
        .unwrap()
        .replace("2.0", "6.4");
    std::fs::write(&path, text).unwrap();
    let out = upc()
        .args(["upc", "run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "infeasible_load");
}

#[test]
fn table1_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, threads) in ["1", "3", "1"].iter().enumerate() {
        let path = dir.path().join(format!("t{i}.csv"));
        run(upc()
            .env("UPC_THREADS", threads)
            .args(["analysis", "table1", "--trials", "3000", "--seed", "17", "--out"])
            .arg(&path));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);

    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.starts_with("# seed=17 stream=0 trials=3000 rejected_singular="));
    let (header, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 12);
    for name in ["sim", "approx", "std_error"] {
        let col = header.iter().position(|h| h == name).unwrap();
        for row in &rows {
            let value: f64 = row[col].parse().unwrap();
            assert_eq!(format_number(value), row[col]);
        }
    }
    let status = header.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|r| r[status] == "ok"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = upc()
        .env("UPC_THREADS", "zero")
        .args(["analysis", "table1", "--trials", "10", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn baseline_holds_target_while_upc_fluctuates() {
    let out = run(upc()
        .args(["baseline", "run", "--seed", "4", "--symbols", "40", "--config"])
        .arg(config("cell_k8_n32_mmse.json")));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("ber=analytic_q_sqrt_sir"));
    let (header, rows) = csv_rows(&text);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let upc_power: Vec<&str> = rows.iter().map(|r| r[col("upc_power_watts")].as_str()).collect();
    assert!(upc_power.windows(2).all(|w| w[0] == w[1]));
    let upc_sir: Vec<f64> = rows
        .iter()
        .map(|r| r[col("upc_sir_linear")].parse().unwrap())
        .collect();
    assert!(upc_sir.iter().any(|g| (g - 6.4).abs() > 0.1));
    for r in &rows {
        let g: f64 = r[col("baseline_sir_linear")].parse().unwrap();
        assert!((g - 6.4).abs() < 1e-8);
        assert_eq!(r[col("baseline_converged")], "true");
    }
}

#[test]
fn cdf_has_both_curves() {
    let out = run(upc()
        .args([
            "analysis", "cdf", "--trials", "3000", "--seed", "2", "--points", "50", "--config",
        ])
        .arg(config("normalized_n64_quarter_mmse.json")));
    let text = String::from_utf8(out.stdout).unwrap();
    let meta = text.lines().next().unwrap();
    assert!(
        meta.contains("trials=3000") && meta.contains("rejected_singular=0") && meta.contains("c_over_n=")
    );
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["sir_linear", "sir_db", "empirical_cdf", "approx_cdf"]);
    assert_eq!(rows.len(), 50);
    let first: Vec<f64> = rows[0].iter().map(|x| x.parse().unwrap()).collect();
    let last: Vec<f64> = rows[49].iter().map(|x| x.parse().unwrap()).collect();
    assert!(first[2] > 0.0 && first[2] < 0.01);
    assert_eq!(last[2], 1.0);
    assert!(last[3] > 0.5 && first[3] < 0.5);
}

#[test]
fn json_trace_is_valid() {
    let out = run(upc()
        .args(["upc", "run", "--format", "json", "--config"])
        .arg(config("cell_k8_n32_io.json")));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["metadata"]["converged"], "true");
    assert!(json["rows"].as_array().unwrap().len() >= 16);
}
