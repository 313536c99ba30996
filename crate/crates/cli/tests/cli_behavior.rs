//! End-to-end behavior of the `pcmsim` binary: recipe smoke runs,
//! artifact determinism, configuration validation, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pcmsim")
}

fn repo_dir(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn pcmsim")
}

fn run_recipe(recipe: &str, out: &Path, extra: &[&str]) -> Output {
    let recipe = repo_dir(recipe);
    let mut args = vec![
        "run",
        "--recipe",
        recipe.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run_cli(&args)
}

fn read_dir_sorted(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn synthetic_recipe_smoke_emits_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_synthetic_demo.kv", tmp.path(), &[]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let names = read_dir_sorted(tmp.path());
    assert!(names.contains(&"manifest.kv".to_string()));
    assert!(names.contains(&"metrics.kv".to_string()));
    assert!(
        names.iter().any(|n| n.starts_with("snapshot_") && n.ends_with(".csv")),
        "no snapshot emitted: {names:?}"
    );
    let metrics = fs::read_to_string(tmp.path().join("metrics.kv")).unwrap();
    assert!(metrics.contains("f1 = "));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp1 = tempfile::tempdir().unwrap();
    let tmp2 = tempfile::tempdir().unwrap();
    let fast = ["--set", "k_steps=400", "--set", "n=2500", "--set", "image="];
    let mut args1 = fast.to_vec();
    args1.extend(["--workers", "1"]);
    let mut args4 = fast.to_vec();
    args4.extend(["--workers", "4"]);
    assert!(run_recipe("configs/recipe_synthetic_demo.kv", tmp1.path(), &args1)
        .status
        .success());
    assert!(run_recipe("configs/recipe_synthetic_demo.kv", tmp2.path(), &args4)
        .status
        .success());
    let names1 = read_dir_sorted(tmp1.path());
    assert_eq!(names1, read_dir_sorted(tmp2.path()));
    for name in names1 {
        let a = fs::read(tmp1.path().join(&name)).unwrap();
        let b = fs::read(tmp2.path().join(&name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between worker counts");
    }
}

#[test]
fn seed_override_changes_the_realization() {
    let tmp1 = tempfile::tempdir().unwrap();
    let tmp2 = tempfile::tempdir().unwrap();
    let fast = ["--set", "k_steps=200", "--set", "n=900", "--set", "image="];
    let mut args2 = fast.to_vec();
    args2.extend(["--seed", "12345"]);
    assert!(run_recipe("configs/recipe_synthetic_demo.kv", tmp1.path(), &fast)
        .status
        .success());
    assert!(run_recipe("configs/recipe_synthetic_demo.kv", tmp2.path(), &args2)
        .status
        .success());
    let a = fs::read(tmp1.path().join("weights.csv")).unwrap();
    let b = fs::read(tmp2.path().join("weights.csv")).unwrap();
    assert_ne!(a, b, "different seeds must give different streams");
}

#[test]
fn validate_accepts_the_shipped_configs() {
    let configs = [
        "configs/device_default.kv",
        "configs/device_noise_free.kv",
        "configs/device_constant_growth.kv",
        "configs/recipe_synthetic_demo.kv",
        "configs/recipe_accumulation.kv",
        "configs/recipe_weather_demo.kv",
        "configs/recipe_factor.kv",
        "configs/recipe_matvec.kv",
    ];
    let paths: Vec<PathBuf> = configs.iter().map(|c| repo_dir(c)).collect();
    let mut args = vec!["validate".to_string()];
    args.extend(paths.iter().map(|p| p.to_str().unwrap().to_string()));
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run_cli(&arg_refs);
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn validate_names_the_offending_keys() {
    let tmp = tempfile::tempdir().unwrap();

    // Floor above ceiling in a recipe.
    let recipe = tmp.path().join("bad_recipe.kv");
    let device = repo_dir("configs/device_default.kv");
    fs::write(
        &recipe,
        format!(
            "kind = synthetic-correlation\ndevice_params = {}\nn = 100\nn_correlated = 10\n\
             p = 0.01\nc = 0.1\nk_steps = 10\ni_min_ua = 90\ni_max_ua = 80\n",
            device.display()
        ),
    )
    .unwrap();
    let out = run_cli(&["validate", recipe.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("i_min_ua"), "report: {stdout}");
    assert!(stdout.contains("i_max_ua"), "report: {stdout}");

    // Growth at room temperature violates the shape anchors.
    let device_bad = tmp.path().join("bad_device.kv");
    let text = fs::read_to_string(&device).unwrap().replace(
        "(300, 0) (400, 0)",
        "(300, 0.01) (400, 0.01)",
    );
    fs::write(&device_bad, text).unwrap();
    let out = run_cli(&["validate", device_bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("vg_table_k_nm_per_ns") && stdout.contains("300 K"),
        "report: {stdout}"
    );
}

#[test]
fn usage_errors_exit_two() {
    let out = run_cli(&["run", "--recipe"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cli(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_synthetic_demo.kv", tmp.path(), &["--set", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_recipe_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "run",
        "--recipe",
        "/nonexistent/recipe.kv",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_recipe_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe(
        "configs/recipe_synthetic_demo.kv",
        tmp.path(),
        &["--set", "k_stepz=100"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_stepz"));
}

#[test]
fn two_means_classifier_is_available_as_an_alternative() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe(
        "configs/recipe_synthetic_demo.kv",
        tmp.path(),
        &["--set", "classify=two-means"],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = fs::read_to_string(tmp.path().join("metrics.kv")).unwrap();
    let f1: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("f1 = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(f1 > 0.9, "two-means classification degenerated: {metrics}");
}

#[test]
fn accumulation_recipe_produces_monotone_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_accumulation.kv", tmp.path(), &[]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(tmp.path().join("curves.csv")).unwrap();
    let mut rows = text.lines();
    let header = rows.next().unwrap();
    assert!(header.starts_with("pulse_index,"));
    let table: Vec<Vec<f64>> = rows
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(table.len(), 61); // pulse 0 baseline + 60 pulses
    let n_cols = table[0].len() - 1;
    assert_eq!(n_cols, 4);
    for col in 1..=n_cols {
        let series: Vec<f64> = table.iter().map(|r| r[col]).collect();
        let max = series.iter().cloned().fold(f64::MIN, f64::max);
        let sat = series.iter().position(|&v| v >= 0.98 * max).unwrap();
        for k in 0..sat {
            assert!(
                series[k + 1] > series[k],
                "column {col} not strictly increasing at pulse {k}"
            );
        }
    }
    // Higher SET current never reads lower at a fixed pulse index >= 5.
    for row in table.iter().skip(5) {
        for col in 1..n_cols {
            assert!(
                row[col + 1] >= row[col] - 0.1,
                "current ordering violated at pulse {} between columns {col} and {}",
                row[0],
                col + 1
            );
        }
    }
}

#[test]
fn weather_recipe_detects_the_planted_group() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_weather_demo.kv", tmp.path(), &[]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = fs::read_to_string(tmp.path().join("metrics.kv")).unwrap();
    assert!(metrics.contains("predicted_correlated = 8"), "{metrics}");
    assert!(metrics.contains("kmeans_agreement = 1"), "{metrics}");
    let stations = fs::read_to_string(tmp.path().join("stations.csv")).unwrap();
    assert_eq!(stations.lines().count(), 31);
    // Covariance export mirrors the small-N inspection path.
    assert!(tmp.path().join("covariance.csv").exists());
}

#[test]
fn factor_and_matvec_recipes_agree_with_their_oracles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_factor.kv", tmp.path(), &[]);
    assert!(out.status.success());
    let metrics = fs::read_to_string(tmp.path().join("metrics.kv")).unwrap();
    assert!(metrics.contains("mismatches = 0"), "{metrics}");

    let tmp = tempfile::tempdir().unwrap();
    let out = run_recipe("configs/recipe_matvec.kv", tmp.path(), &[]);
    assert!(out.status.success());
    let metrics = fs::read_to_string(tmp.path().join("metrics.kv")).unwrap();
    let err: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("relative_l2_error = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-3, "matvec error {err}");
}
