use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use torus_needlets::{uniform_density, wrapped_normal, SampleSet};

fn needlets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_needlets"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_samples(dir: &Path, name: &str, samples: &SampleSet) -> PathBuf {
    let path = dir.join(name);
    let mut text = String::new();
    for p in samples.iter() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    path
}

fn uniform_fixture(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let samples = uniform_density(1).unwrap().sample(&mut rng, 8000).unwrap();
    write_samples(dir, "uniform.csv", &samples)
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn with_replications(dir: &Path, name: &str, replications: usize) -> PathBuf {
    let text = fs::read_to_string(config_path(name)).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["replications"] = replications.into();
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn frame_info_lists_levels() {
    let out = needlets(&["frame-info", "--B", "2", "--d", "1", "--jmax", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|f| f.first().is_some_and(|s| s.parse::<usize>().is_ok()))
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][..3], &["0", "2", "5"]);
    assert_eq!(&rows[1][..3], &["1", "4", "9"]);
    assert!(text.contains("I0 =") && text.contains("I1 =") && text.contains("I2 ="));
}

#[test]
fn frame_info_single_level() {
    let out = needlets(&["frame-info", "--jmax", "0"]);
    assert!(out.status.success());
    let levels = stdout(&out)
        .lines()
        .filter(|l| l.split_whitespace().next().is_some_and(|s| s.parse::<usize>().is_ok()))
        .count();
    assert_eq!(levels, 1);
}

#[test]
fn frame_info_rejects_unit_scale() {
    let out = needlets(&["frame-info", "--B", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("B > 1"), "{}", stderr(&out));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let out = needlets(&["--threads", "0", "frame-info"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_with_large_kappa0_kills_everything() {
    let dir = TempDir::new().unwrap();
    let data = uniform_fixture(dir.path());
    let out_dir = dir.path().join("est");
    let m = format!("{}", 1.0 / std::f64::consts::TAU);
    let out = needlets(&[
        "estimate",
        data.to_str().unwrap(),
        "--m",
        "1",
        "--kappa0",
        "5",
        "--M",
        &m,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&out_dir.join("coefficients.csv"));
    assert!(!rows.is_empty());
    for row in rows {
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["n"], 8000);
    assert_eq!(meta["rule"], "hard");
}

#[test]
fn estimate_with_zero_kappa_keeps_every_coefficient() {
    let dir = TempDir::new().unwrap();
    let data = uniform_fixture(dir.path());
    let out_dir = dir.path().join("est");
    let out = needlets(&[
        "estimate",
        data.to_str().unwrap(),
        "--kappa",
        "0",
        "--J",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&out_dir.join("coefficients.csv"));
    assert_eq!(rows.len(), 5 + 9 + 17 + 33);
    for row in rows {
        assert_eq!(row[2], row[3]);
    }
}

#[test]
fn estimate_missing_file_leaves_no_output() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("est");
    let missing = dir.path().join("missing.csv");
    let out = needlets(&[
        "estimate",
        missing.to_str().unwrap(),
        "--kappa",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn estimate_reports_malformed_line() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "0.5\n1.25\nnot-an-angle\n").unwrap();
    let out_dir = dir.path().join("est");
    let out = needlets(&[
        "estimate",
        data.to_str().unwrap(),
        "--kappa",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(!out_dir.exists());
}

#[test]
fn estimate_counts_wrapped_angles() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = uniform_density(1).unwrap().sample(&mut rng, 500).unwrap();
    let data = write_samples(dir.path(), "s.csv", &samples);
    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str("7.0\n-1.0\n");
    fs::write(&data, text).unwrap();
    let out_dir = dir.path().join("est");
    let out = needlets(&[
        "estimate",
        data.to_str().unwrap(),
        "--kappa",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("2 coordinate(s)"), "{}", stderr(&out));
}

#[test]
fn estimate_grid_matches_eval_grid() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = wrapped_normal(1.0, 10).unwrap().sample(&mut rng, 2000).unwrap();
    let data = write_samples(dir.path(), "wn.csv", &samples);
    let out_dir = dir.path().join("est");
    let density = "wrapped_normal(1.0)";
    let out = needlets(&[
        "estimate",
        data.to_str().unwrap(),
        "--kappa0",
        "1",
        "--M",
        "0.4",
        "--grid",
        "128",
        "--density",
        density,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let again = dir.path().join("again.csv");
    let out = needlets(&[
        "eval-grid",
        out_dir.join("coefficients.csv").to_str().unwrap(),
        "--m",
        "1",
        "--grid",
        "128",
        "--density",
        density,
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(&again).unwrap(), fs::read(out_dir.join("grid.csv")).unwrap());
    let header = fs::read_to_string(&again).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "theta_1,value,truth");
}

#[test]
fn bench_reproduces_table_layout_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = with_replications(dir.path(), "paper_table1.json", 3);
    let run = |out: &Path, threads: &str| {
        let o = needlets(&[
            "--threads",
            threads,
            "bench",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        o
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let summary = stdout(&run(&a, "1"));
    run(&b, "8");
    for name in [
        "paper_table1.csv",
        "paper_table1_risks.csv",
        "paper_table1_proxy_risks.csv",
        "paper_table1.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    let rows = csv_rows(&a.join("paper_table1.csv"));
    assert_eq!(rows.len(), 3 * 4 * 4);
    assert!(summary.contains("kappa0 = 5"));
}

#[test]
fn bench_rejects_zero_replications() {
    let dir = TempDir::new().unwrap();
    let config = with_replications(dir.path(), "paper_table1.json", 0);
    let out_dir = dir.path().join("out");
    let out = needlets(&["bench", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("replications"), "{}", stderr(&out));
    assert!(!out_dir.exists());
}

#[test]
fn bench_lists_every_schema_problem() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(
        &config,
        r#"{"density": "uniform", "d": 1, "B": 0.5, "m": [1], "n": 8000, "replications": 2,
            "kappa0": [1], "rules": ["median"], "J": 4, "grid": 256, "p": [2], "seed": 1,
            "risk_method": "both", "literal_paper_kappa": false, "extra": 1}"#,
    )
    .unwrap();
    let out = needlets(&[
        "bench",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for needle in ["extra", "rules", "B"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn shipped_configs_parse() {
    for name in ["paper_table1.json", "wrapped_normal_table3.json"] {
        torus_needlets::ExperimentConfig::from_path(&config_path(name)).unwrap();
    }
}
