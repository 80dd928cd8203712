use std::path::Path;
use std::process::{Command, Output};

fn ccdl(args: &[&str]) -> Output {
    ccdl_with_threads(args, "0")
}

fn ccdl_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccdl"))
        .args(args)
        .env("CCDL_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<csv::StringRecord> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    reader.records().map(|r| r.unwrap()).collect()
}

fn column(out: &Output, name: &str) -> Vec<String> {
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let idx = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

#[test]
fn header_is_the_documented_schema() {
    let out = ccdl(&["rate", "--precoder", "mf", "--G", "2", "--L", "8", "--Q", "2", "--snr-db", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "precoder,L,Q,G,snr_db,zeta,c,rate_nats,rate_bits,effective_rate_nats,source,trials,seed,c_star,q_star,gain"
    );
}

#[test]
fn optimize_example() {
    let out = ccdl(&[
        "optimize", "--precoder", "zf", "--G", "6", "--L", "32", "--snr-db", "20", "--beta", "10", "--tc", "0.04",
        "--wc", "300e3",
    ]);
    assert_eq!(records(&out).len(), 1);
    assert!((num(&column(&out, "c_star")[0]) - 0.59).abs() < 5e-3);
    assert_eq!(column(&out, "q_star")[0], "19");
    assert!((num(&column(&out, "gain")[0]) - 3.12).abs() < 5e-3);
}

#[test]
fn rate_example() {
    let out = ccdl(&["rate", "--precoder", "zf", "--G", "5", "--L", "64", "--Q", "16", "--snr-db", "10", "--zeta", "0"]);
    let rate = num(&column(&out, "rate_nats")[0]);
    assert!((rate - 155.67).abs() < 5e-3);
    let bits = num(&column(&out, "rate_bits")[0]);
    assert!((bits - rate / std::f64::consts::LN_2).abs() < 1e-9);
    assert_eq!(column(&out, "source")[0], "closed_form");
    assert_eq!(column(&out, "trials")[0], "");
}

#[test]
fn optimized_gain_sweep_example() {
    let out = ccdl(&["sweep", "--axis", "snr_db", "--start", "0", "--stop", "25", "--step", "1", "--preset", "fig2-L32"]);
    let gains: Vec<f64> = column(&out, "gain").iter().map(|g| num(g)).collect();
    assert_eq!(gains.len(), 26);
    assert!(gains.windows(2).all(|w| w[1] >= w[0]), "{gains:?}");
    let snr: Vec<f64> = column(&out, "snr_db").iter().map(|s| num(s)).collect();
    assert_eq!(snr, (0..26).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn preset_points() {
    let fig2 = ccdl(&["optimize", "--preset", "fig2-L32"]);
    assert!((num(&column(&fig2, "gain")[0]) - 3.1).abs() < 0.05);
    let fig3 = ccdl(&["gain", "--preset", "fig3-L64", "--precoder", "mf"]);
    assert!((num(&column(&fig3, "gain")[0]) - 5.46).abs() < 0.01);
    let fig1 = ccdl(&["sweep", "--preset", "fig1"]);
    let rows = records(&fig1);
    assert_eq!(rows.len(), 63 * 3);
    assert!(rows.iter().all(|r| &r[3] == "5" && &r[4] == "10.0"));
}

#[test]
fn flags_override_config_file_which_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, r#"{"L": 128, "G": 3, "precoder": "mf"}"#).unwrap();
    let cfg = path.to_str().unwrap();

    let from_file = ccdl(&["gain", "--preset", "fig3-L64", "--config", cfg]);
    assert_eq!(column(&from_file, "L"), vec!["128"]);
    assert_eq!(column(&from_file, "G"), vec!["3"]);
    assert_eq!(column(&from_file, "Q"), vec!["8"]);

    let from_flags = ccdl(&["gain", "--preset", "fig3-L64", "--config", cfg, "--L", "32", "--precoder", "zf"]);
    assert_eq!(column(&from_flags, "L"), vec!["32"]);
    assert_eq!(column(&from_flags, "precoder"), vec!["zf"]);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let out = ccdl(&[
        "rate", "--precoder", "rzf", "--G", "2", "--L", "16", "--Q", "4", "--snr-db", "5", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn cache_parameters_define_g() {
    let out = ccdl(&["rate", "--precoder", "zf", "--lambda", "4", "--gamma", "1/4", "--K", "16", "--L", "16", "--Q", "4", "--snr-db", "10"]);
    assert_eq!(column(&out, "G"), vec!["2"]);
    let too_many = ccdl(&["rate", "--precoder", "zf", "--lambda", "4", "--gamma", "0.25", "--K", "16", "--L", "16", "--Q", "5", "--snr-db", "10"]);
    assert_eq!(error_line(&too_many)["error"], "QExceedsGroupSize");
    let fractional = ccdl(&["rate", "--lambda", "5", "--gamma", "0.3", "--L", "16", "--Q", "4", "--snr-db", "10"]);
    assert_eq!(error_line(&fractional)["error"], "NonIntegerLambdaGamma");
}

#[test]
fn failures_emit_one_json_line_and_nonzero_status() {
    let unknown = ccdl(&["sweep", "--preset", "fig9"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(error_line(&unknown)["error"], "UnknownPreset");

    let zero_step = ccdl(&["sweep", "--axis", "Q", "--start", "1", "--stop", "4", "--step", "0", "--G", "2", "--L", "8", "--snr-db", "0"]);
    assert_eq!(error_line(&zero_step)["error"], "InvalidConfig");

    let missing = ccdl(&["rate", "--precoder", "zf", "--G", "2", "--L", "8", "--snr-db", "0"]);
    assert_eq!(error_line(&missing)["error"], "MissingParameter");

    let square = ccdl(&["rate", "--precoder", "zf", "--G", "2", "--L", "8", "--Q", "8", "--snr-db", "0"]);
    assert_eq!(error_line(&square)["error"], "COutOfRange");
    assert!(square.stdout.is_empty());

    let unbounded = ccdl(&["optimize", "--precoder", "mf", "--G", "2", "--L", "8", "--snr-db", "0", "--zeta", "0"]);
    assert_eq!(error_line(&unbounded)["error"], "UnboundedObjective");

    let bad_flag = ccdl(&["rate", "--L", "eight"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    assert_eq!(error_line(&bad_flag)["error"], "Usage");

    let bad_threads = ccdl_with_threads(&["rate", "--G", "1", "--L", "4", "--Q", "1", "--snr-db", "0"], "many");
    assert_eq!(error_line(&bad_threads)["error"], "InvalidConfig");
}

#[test]
fn low_trial_counts_warn_but_run() {
    let out = ccdl(&["simulate", "--precoder", "mf", "--G", "1", "--L", "4", "--Q", "2", "--snr-db", "0", "--trials", "10"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"warning\""));
    assert_eq!(records(&out).len(), 1);
}

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

const SIMULATE: &[&str] = &[
    "simulate", "--precoder", "all", "--G", "2", "--L", "8", "--Q", "4", "--snr-db", "10", "--trials", "200", "--seed",
    "7",
];

const SWEEP_SIMULATE: &[&str] = &[
    "sweep", "--measure", "simulate", "--axis", "L", "--start", "8", "--stop", "16", "--step", "4", "--G", "3", "--Q",
    "4", "--snr-db", "10", "--trials", "100", "--seed", "3", "--precoder", "all",
];

#[test]
fn golden_outputs_are_stable_across_worker_counts() {
    for (args, file) in [
        (SIMULATE, "simulate.csv"),
        (SWEEP_SIMULATE, "sweep_simulate.csv"),
        (&["sweep", "--preset", "fig3-L64"][..], "sweep_fig3.csv"),
    ] {
        let expected = golden(file);
        for threads in ["1", "3"] {
            let out = ccdl_with_threads(args, threads);
            assert!(out.status.success());
            assert!(out.stdout == expected, "{file} differs with {threads} workers");
        }
    }
}
