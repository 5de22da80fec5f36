//! Command-line interface acceptance checks: deterministic output,
//! exit-code contract, and the reference sweep reaching the expected
//! maximum distance.

use std::path::PathBuf;
use std::process::Command;

fn fpqkd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpqkd"))
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("fpqkd-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn acceptance_10_sweep_is_byte_identical_across_runs() {
    let out_a = temp_path("det-a.csv");
    let out_b = temp_path("det-b.csv");
    for out in [&out_a, &out_b] {
        let status = fpqkd()
            .args([
                "--lambda",
                "0.01",
                "--distance-min",
                "0",
                "--distance-max",
                "40",
                "--distance-step",
                "20",
                "--out",
                out.to_str().unwrap(),
                "sweep",
            ])
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "identical configs must produce byte-identical CSV");
    std::fs::remove_file(&out_a).ok();
    std::fs::remove_file(&out_b).ok();
    println!("ACCEPTANCE 10 PASS - two sweep runs emitted byte-identical CSV");
}

#[test]
fn empty_distance_grid_is_a_usage_error() {
    let output = fpqkd()
        .args([
            "--distance-min",
            "100",
            "--distance-max",
            "50",
            "sweep",
        ])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("distance grid is empty"),
        "stderr must name the grid: {stderr}"
    );
}

#[test]
fn config_file_is_applied_and_flags_win() {
    let cfg_path = temp_path("config.cfg");
    std::fs::write(&cfg_path, "lambda = 0.05\ndistance_max = 10\ndistance_step = 5\n").unwrap();
    let output = fpqkd()
        .args(["--config", cfg_path.to_str().unwrap(), "--lambda", "0.02", "sweep"])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    // The flag overrode the file's lambda; the file's grid stayed.
    assert!(stdout.contains("# lambda = 0.02"));
    assert!(stdout.contains("# distance_grid = 0..10 step 5"));
    std::fs::remove_file(&cfg_path).ok();
}

#[test]
fn env_var_names_the_default_config() {
    let cfg_path = temp_path("env.cfg");
    std::fs::write(&cfg_path, "lambda = 0.03\ndistance_max = 5\ndistance_step = 5\n").unwrap();
    let output = fpqkd()
        .env("FPQKD_CONFIG", &cfg_path)
        .arg("sweep")
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("# lambda = 0.03"));
    std::fs::remove_file(&cfg_path).ok();
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg_path = temp_path("bad.cfg");
    std::fs::write(&cfg_path, "nonsense_key = 1\n").unwrap();
    let output = fpqkd()
        .args(["--config", cfg_path.to_str().unwrap(), "sweep"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("nonsense_key"));
    std::fs::remove_file(&cfg_path).ok();
}

#[test]
fn verify_passes_at_truncation_four() {
    let output = fpqkd()
        .args(["--lambda", "0.05", "--n-cut", "4", "verify"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("class,max_discrepancy_z,max_discrepancy_x"));
    // One line per class plus header and comments.
    let data_lines = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("class,"))
        .count();
    assert_eq!(data_lines, 16);
}

#[test]
fn dists_dumps_all_classes_in_both_bases() {
    let output = fpqkd()
        .args(["--lambda", "0.05", "--n-cut", "4", "dists"])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("class,"))
        .collect();
    // 16 classes x 2 bases x 15 grid points at n_cut = 4.
    assert_eq!(rows.len(), 16 * 2 * 15);
    assert!(rows.iter().any(|r| r.starts_with("hvpm,x,")));
}

#[test]
fn optimize_emits_operating_points() {
    let output = fpqkd()
        .args([
            "--lambda-min",
            "0.005",
            "--lambda-max",
            "0.2",
            "--distance-min",
            "0",
            "--distance-max",
            "50",
            "--distance-step",
            "50",
            "optimize",
        ])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout
        .contains("distance_km,lambda_opt,mean_pairs_opt,per_pulse_rate,per_herald_rate,throughput_bps,all_zero"));
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("distance_km"))
        .collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let mean_pairs: f64 = fields[2].parse().unwrap();
        let throughput: f64 = fields[5].parse().unwrap();
        assert!(mean_pairs > 0.0 && throughput > 0.0, "row {row}");
        assert_eq!(fields[6], "false");
    }
}

#[test]
fn baseline_emits_optimal_reference_rates() {
    let output = fpqkd()
        .args([
            "--distance-min",
            "0",
            "--distance-max",
            "100",
            "--distance-step",
            "50",
            "baseline",
        ])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("distance_km,mu_opt,per_pulse_rate"));
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("distance_km"))
        .collect();
    assert_eq!(rows.len(), 3);
    let mut last = f64::INFINITY;
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let rate: f64 = fields[2].parse().unwrap();
        assert!(rate > 0.0 && rate <= last);
        last = rate;
    }
}

#[test]
fn default_sweep_reaches_the_reference_distance() {
    let out = temp_path("ref.csv");
    let status = fpqkd()
        .args(["--out", out.to_str().unwrap(), "sweep"])
        .status()
        .expect("binary runs");
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();

    let mut last_positive = 0.0f64;
    for line in body.lines() {
        if line.starts_with('#') || line.starts_with("distance_km") {
            continue;
        }
        let mut fields = line.split(',');
        let distance: f64 = fields.next().unwrap().parse().unwrap();
        let _lambda = fields.next().unwrap();
        let rate: f64 = fields.next().unwrap().parse().unwrap();
        if rate > 0.0 {
            last_positive = last_positive.max(distance);
        }
    }
    assert!(
        (last_positive - 241.0).abs() <= 10.0,
        "last positive-rate row at {last_positive} km, expected 241 +- 10"
    );
    println!("CLI sweep: last positive-rate row at {last_positive} km");
}
