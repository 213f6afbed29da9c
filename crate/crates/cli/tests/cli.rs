use std::path::Path;
use std::process::{Command, Output};

fn vlfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlfsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn verify_code_exit_status() {
    let out = vlfsim(&["verify-code", "--nu", "6"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS nu=6 (117,127,155): computed (15, 3)"));

    let out = vlfsim(&["verify-code", "--nu", "8", "--generators", "575,623,727"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("computed (18, 1)"));

    let out = vlfsim(&["verify-code", "--nu", "6", "--generators", "117,127,154"]);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("FAIL") && text.contains("published (15, 3)"), "{text}");
}

#[test]
fn simulate_writes_rows_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.toml",
        "channel = \"bsc\"\np = 0.05\nepsilon = 1e-3\nnu = 6\nk_sweep = [16, 32, 64]\nnum_trials = 200\nseed = 21\n",
    );
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let out = vlfsim(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap());
        let json = std::fs::read_to_string(out_dir.join("simulate_nu6_117-127-155_k32.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["config"]["seed"], 21);
        assert_eq!(v["config"]["channel"], "bsc");
        assert_eq!(v["stats"]["k"], 32);
        assert!(v["config"].get("workers").is_none());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert!(csvs[0].contains("\"seed\":21"));
    let rows = data_rows(&csvs[0]);
    assert_eq!(rows.len(), 3);
    let ells: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(ells[0] < ells[1] && ells[1] < ells[2], "{ells:?}");
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.toml", "channel = \"bsc\"\np = 0.05\nnu = 6\nk_sweep = [16]\nnum_trials = 100\n");
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = tmp.path().join(seed);
        let out = vlfsim(&["simulate", "--config", &cfg, "--seed", seed, "--trials", "50", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        csvs.push(std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap());
    }
    assert_ne!(data_rows(&csvs[0]), data_rows(&csvs[1]));
    assert_eq!(data_rows(&csvs[0])[0][5], "50");
}

#[test]
fn invalid_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("channel = \"bsc\"\np = 0.05\nnu = 6\nk_sweep = []\n", "k_sweep"),
        ("channel = \"bsc\"\np = 0.05\nnu = 6\nk_sweeps = [8]\n", "k_sweeps"),
    ] {
        let cfg = write_config(tmp.path(), "bad.toml", text);
        let out = vlfsim(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains(key));
    }
}

#[test]
fn dmc_converse_on_awgn_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", "channel = \"biawgn\"\nsnr_db = 2.0\nkinds = [\"converse_dmc\"]\n");
    let out = vlfsim(&["bounds", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("BSC only"));
}

#[test]
fn bsc_bounds_emit_all_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.toml",
        "channel = \"bsc\"\np = 0.05\nkinds = [\"all\"]\nell_grid = [10, 50, 200, 1000, 10000]\n",
    );
    let out_dir = tmp.path().join("o");
    let out = vlfsim(&["bounds", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curves: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("bounds_") && n.ends_with(".csv"))
        .collect();
    assert_eq!(curves.len(), 4, "{curves:?}");

    let text = std::fs::read_to_string(out_dir.join("bounds_achievability.csv")).unwrap();
    assert!(text.lines().any(|l| l == "kind,ell,rate_bits,stderr"));
    let last = data_rows(&text).pop().unwrap();
    assert_eq!(last[0], "achievability");
    let rate: f64 = last[2].parse().unwrap();
    let capacity = 0.713_603_2;
    assert!((rate - capacity).abs() < 0.01 * capacity, "{rate}");
}
