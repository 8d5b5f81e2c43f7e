use std::path::Path;
use std::process::{Command, Output};

fn selfcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfcal")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SWEEP: &[&str] = &[
    "sweep",
    "--model",
    "2",
    "--m",
    "64",
    "--n",
    "16",
    "--p",
    "8",
    "--sensing",
    "tall-hadamard",
    "--snr",
    "10,20,30,40",
    "--trials",
    "10",
    "--solver",
    "lls",
];

fn strip_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map(|(head, _)| head.to_owned()).unwrap_or_default()).collect()
}

#[test]
fn sweep_emits_one_row_per_trial_and_level() {
    let out = selfcal(SWEEP);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 41);
    assert!(lines[0].starts_with("model,solver,m,n,p,snr_db,trial,rel_error_db"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("model,")).count(), 1);
    assert!(!text.contains('\r'));
}

#[test]
fn sweep_is_deterministic_modulo_wall_time() {
    let a = stdout(&selfcal(SWEEP));
    let b = stdout(&selfcal(SWEEP));
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
}

#[test]
fn noiseless_rows_sit_below_the_exact_recovery_floor() {
    let out = selfcal(&["sweep", "--model", "2", "--m", "32", "--n", "8", "--p", "4", "--snr", "inf", "--trials", "3"]);
    assert!(out.status.success());
    for line in stdout(&out).lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5], "inf");
        let db: f64 = cols[7].parse().unwrap();
        assert!(db <= -120.0, "{line}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model": 1, "m": 16, "n": 4, "p": 4, "sensing": "gaussian", "w": "ones", "snr": [20, 30], "trials": 2}"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = selfcal(&["sweep", "--config", cfg.to_str().unwrap(), "--trials", "3", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.lines().nth(1).unwrap().starts_with("1,lls,16,4,4,20.0,0,"));
}

#[test]
fn compare_pairs_solvers_on_identical_instances() {
    let args = [
        "compare",
        "--model",
        "3",
        "--m",
        "32",
        "--n",
        "8",
        "--p",
        "4",
        "--sensing",
        "gaussian",
        "--snr",
        "20",
        "--trials",
        "2",
    ];
    let out = selfcal(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let solvers: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(solvers, ["lls", "spectral", "lls", "spectral"]);
    // the bound columns depend only on the instance
    let bounds: Vec<String> =
        text.lines().skip(1).map(|l| l.split(',').skip(10).take(3).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(bounds[0], bounds[1]);
    assert_eq!(bounds[2], bounds[3]);
}

#[test]
fn generate_is_reproducible() {
    let args =
        ["generate", "--model", "2", "--m", "16", "--n", "4", "--p", "2", "--sensing", "gaussian", "--seed", "9"];
    let a = selfcal(&args);
    let b = selfcal(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dump: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(dump["y"].as_array().unwrap().len(), 2);
    assert_eq!(dump["y"][0].as_array().unwrap().len(), 16);
}

#[test]
fn solve_reports_and_exit_codes() {
    let out = selfcal(&[
        "solve",
        "--model",
        "1",
        "--m",
        "16",
        "--n",
        "4",
        "--p",
        "4",
        "--sensing",
        "gaussian",
        "--w",
        "ones",
        "--snr",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["results"][0]["rel_error_db"].as_f64().unwrap() < -10.0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cap.json");
    std::fs::write(&cfg, r#"{"model": 2, "m": 32, "n": 8, "p": 4, "snr": [10], "lls": {"max_iterations": 1}}"#)
        .unwrap();
    let out = selfcal(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_with_two() {
    for args in [
        &["sweep", "--m", "0"][..],
        &["sweep", "--sensing", "bogus"],
        &["sweep", "--snr", "abc"],
        &["sweep", "--trials", "0"],
        &["sweep", "--model", "4"],
        &["sweep", "--sensing", "tall-hadamard", "--m", "24", "--n", "4"],
        &["deblur", "--size", "24"],
    ] {
        assert_eq!(selfcal(args).status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n2 2\n65535\n\0\0\0\0").unwrap();
    let out = selfcal(&["deblur", "--image", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("255"));
}

fn read_raster(path: &Path) -> Vec<u8> {
    let bytes = std::fs::read(path).unwrap();
    let header = b"P5\n32 32\n255\n";
    assert!(bytes.starts_with(header));
    bytes[header.len()..].to_vec()
}

#[test]
fn deblur_writes_images_and_recovers_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfcal(&["deblur", "--support", "12", "--p", "16", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rel_error"].as_f64().unwrap() < 1e-3);
    let original = read_raster(&dir.path().join("original.pgm"));
    let recovered = read_raster(&dir.path().join("recovered.pgm"));
    // aligned before writing, so quantized pixels agree
    assert!(original.iter().zip(&recovered).all(|(a, b)| a.abs_diff(*b) <= 1));
    for name in ["blurred.pgm", "uncalibrated.pgm"] {
        assert_eq!(read_raster(&dir.path().join(name)).len(), 32 * 32);
    }

    // a written image feeds back in as input
    let again = selfcal(&[
        "deblur",
        "--image",
        dir.path().join("original.pgm").to_str().unwrap(),
        "--out",
        dir.path().join("second").to_str().unwrap(),
    ]);
    assert!(again.status.success());
    assert_eq!(read_raster(&dir.path().join("second/original.pgm")), original);
}

#[test]
fn verify_lemmas_suite_passes() {
    let out = selfcal(&["verify", "--suite", "lemmas"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn verify_bounds_suite_reports_rates() {
    let out = selfcal(&["verify", "--suite", "bounds", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("kappa-bound") && text.contains("sigma2-bound") && text.contains("lambda-bound"));
}
