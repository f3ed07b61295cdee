use std::path::Path;
use std::process::{Command, Output};

use rent_market::experiments::{
    parse_predictions_csv, parse_sweep_csv, HISTOGRAM_FILE, PARTIAL_MARKER, PREDICTIONS_FILE,
    REPORT_FILE, SWEEP_FILE, TIMESERIES_FILE,
};
use rent_market::stats::{parse_histogram_csv, parse_timeseries_csv};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rent-market"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL: [&str; 6] = [
    "--num-flats",
    "300",
    "--burn-in",
    "50",
    "--measure-sweeps",
    "50",
];

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let mut args = vec![
        "simulate",
        "--seed",
        "4",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let out = cli(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let ts = parse_timeseries_csv(&read(&out_dir.join(TIMESERIES_FILE))).unwrap();
    assert_eq!(ts.first().unwrap().sweep, 0);
    assert_eq!(ts.last().unwrap().sweep, 100);
    let hist = parse_histogram_csv(&read(&out_dir.join(HISTOGRAM_FILE))).unwrap();
    assert!(hist.len() > 3);
    let preds = parse_predictions_csv(&read(&out_dir.join(PREDICTIONS_FILE))).unwrap();
    assert_eq!(preds.len(), 1);
    let report: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join(REPORT_FILE))).unwrap();
    assert_eq!(report["config"]["seed"], 4);
    assert_eq!(report["config"]["num_flats"], 300);
    assert!(report["pooled"]["gaussian_fit"]["goodness"].is_number());
    assert!(!out_dir.join(PARTIAL_MARKER).exists());
}

#[test]
fn replicas_get_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reps");
    let mut args = vec![
        "simulate",
        "--replicas",
        "3",
        "--seed",
        "10",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend(SMALL);
    assert_eq!(code(&cli(&args)), 0);
    let report: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join(REPORT_FILE))).unwrap();
    assert_eq!(report["seeds"], serde_json::json!([10, 11, 12]));
    let hists: Vec<String> = (0..3)
        .map(|k| read(&out_dir.join(format!("replica-{k}")).join(HISTOGRAM_FILE)))
        .collect();
    assert_ne!(hists[0], hists[1]);
    assert_ne!(hists[1], hists[2]);
}

#[test]
fn sweep_over_an_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--axis",
        "density",
        "--values",
        "0.4,0.6",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let out = cli(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_sweep_csv(&read(&out_dir.join(SWEEP_FILE))).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].parameter, "density");
    assert!(rows[0].x_eq < rows[1].x_eq);
    assert!(out_dir.join("point-1").join(HISTOGRAM_FILE).exists());
}

#[test]
fn predict_prints_the_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "predict",
        "--densities",
        "0.3,0.7",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let rows = parse_predictions_csv(&read(&dir.path().join(PREDICTIONS_FILE))).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].p_eq < rows[1].p_eq);

    let out = cli(&["predict", "--output-dir", dir.path().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("8.10526316e1"), "{text}");
}

#[test]
fn walk_writes_a_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "walk",
        "--steps",
        "100000",
        "--walk-burn-in",
        "1000",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("walk.csv"));
    assert!(csv.starts_with("x,phi\n"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn invalid_configuration_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["simulate", "--measure-sweeps", "0", "--output-dir", d],
        vec!["simulate", "--density", "1.5", "--output-dir", d],
        vec!["simulate", "--raise-steps", "0", "--output-dir", d],
        vec![
            "simulate",
            "--lattice-resolution",
            "-0.001",
            "--output-dir",
            d,
        ],
        vec!["simulate", "--init", "gaussian:90", "--output-dir", d],
        vec![
            "sweep",
            "--axis",
            "nonsense",
            "--values",
            "1",
            "--output-dir",
            d,
        ],
        vec!["simulate", "--no-such-flag"],
    ] {
        let out = cli(&args);
        assert_eq!(
            code(&out),
            1,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, "{\"density\": \"high\"}").unwrap();
    assert_eq!(
        code(&cli(&["simulate", "--config", bad_json.to_str().unwrap()])),
        1
    );
    assert_eq!(code(&cli(&["--help"])), 0);
}

#[test]
fn unreached_equilibrium_exits_with_2_and_marks_partial() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("partial");
    let out = cli(&[
        "simulate",
        "--num-flats",
        "200",
        "--raise-prob",
        "1.0",
        "--init",
        "dirac:2",
        "--burn-in",
        "auto",
        "--burn-in-cap",
        "30",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join(PARTIAL_MARKER).exists());
    let ts = parse_timeseries_csv(&read(&out_dir.join(TIMESERIES_FILE))).unwrap();
    assert!(!ts.is_empty());
}

#[test]
fn unwritable_output_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let mut args = vec!["simulate", "--output-dir", blocker.to_str().unwrap()];
    args.extend(SMALL);
    assert_eq!(code(&cli(&args)), 3);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"num_flats": 250, "seed": 3, "burn_in_sweeps": 40, "measure_sweeps": 40}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = cli(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join(REPORT_FILE))).unwrap();
    assert_eq!(report["config"]["num_flats"], 250);
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["burn_in_sweeps"], 40);
}
