//! Recipe execution: load configs, run the experiment, emit artifacts.
//!
//! Every run writes `manifest.kv` (resolved configuration, seeds, tool
//! version, artifact hashes) and `metrics.kv`, plus recipe-specific
//! artifacts. Nothing time- or host-dependent is written, so a rerun
//! with the same manifest inputs is byte-identical regardless of the
//! worker count.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use pcmsim::apps::{self, DenseMatrix, MatvecOptions};
use pcmsim::array::{ArrayConfig, ArraySim};
use pcmsim::baselines::{self, kmeans_1d, weights_streaming};
use pcmsim::config::{
    device_params_from_kv, engine_config_from_kv, ensemble_config_from_kv, ConfigError, KvMap,
};
use pcmsim::device::{DeviceParams, Pulse};
use pcmsim::engine::{self, ClassificationMetrics, EngineConfig, RunResult};
use pcmsim::ensemble::ProcessEnsemble;
use pcmsim::export;
use pcmsim::image::read_pbm;
use pcmsim::weather::{binarize_weather, select_stations};

use crate::manifest::Manifest;

/// Error split that drives the process exit code: configuration and
/// usage problems exit 2, runtime and invariant failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Classifier choice for the correlation recipes: the fixed threshold
/// (default) or a two-means split of the conductances.
fn read_classifier(kv: &KvMap) -> Result<bool, CliError> {
    match kv.get_str_or("classify", "threshold") {
        "threshold" => Ok(false),
        "two-means" => Ok(true),
        other => Err(CliError::Config(format!(
            "key `classify`: expected threshold|two-means, found `{other}`"
        ))),
    }
}

/// Replace the threshold predictions with the two-means split.
fn apply_two_means(result: &mut RunResult, truth: Option<&[bool]>) -> Result<(), CliError> {
    result.predicted_correlated =
        engine::classify_two_means(&result.replica_means_us).map_err(run_err)?;
    result.metrics =
        truth.map(|t| ClassificationMetrics::from_predictions(&result.predicted_correlated, t));
    Ok(())
}

pub const RECIPE_KINDS: [&str; 5] = [
    "synthetic-correlation",
    "weather-correlation",
    "accumulation-curve",
    "factor",
    "matvec",
];

#[derive(Clone)]
pub struct Recipe {
    pub kind: String,
    pub kv: KvMap,
    /// Directory of the recipe file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

impl Recipe {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let kv = KvMap::from_file(path)?;
        let kind = kv.get_str("kind")?.to_string();
        if !RECIPE_KINDS.contains(&kind.as_str()) {
            return Err(CliError::Config(format!(
                "unknown recipe kind `{kind}` (expected one of {})",
                RECIPE_KINDS.join(", ")
            )));
        }
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { kind, kv, base_dir })
    }

    fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn device_params(&self) -> Result<(DeviceParams, KvMap), CliError> {
        let path = self.resolve(self.kv.get_str("device_params")?);
        let kv = KvMap::from_file(&path)?;
        let params = device_params_from_kv(&kv)?;
        kv.ensure_fully_consumed()?;
        Ok((params, kv))
    }
}

struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn writer(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }
}

/// Execute a recipe and emit its artifact set.
pub fn run_recipe(
    recipe: &Recipe,
    out: &Path,
    seed_override: Option<u64>,
    overrides: &[(String, String)],
) -> Result<(), CliError> {
    let mut recipe = recipe.clone();
    for (k, v) in overrides {
        recipe.kv.set(k, v);
    }
    if let Some(seed) = seed_override {
        recipe.kv.set("seed", &seed.to_string());
    }
    let _ = recipe.kv.get_str("kind")?;
    let out = OutDir::create(out)?;
    match recipe.kind.as_str() {
        "synthetic-correlation" => run_synthetic(&recipe, &out),
        "weather-correlation" => run_weather(&recipe, &out),
        "accumulation-curve" => run_accumulation(&recipe, &out),
        "factor" => run_factor(&recipe, &out),
        "matvec" => run_matvec(&recipe, &out),
        other => Err(CliError::Config(format!("unknown recipe kind `{other}`"))),
    }
}

/// Shared tail for the two correlation recipes: snapshots, labels,
/// optional baseline weights with k-means agreement, metrics, manifest.
#[allow(clippy::too_many_arguments)]
fn emit_correlation_artifacts(
    out: &OutDir,
    manifest: &mut Manifest,
    result: &RunResult,
    cfg: &EngineConfig,
    weights: Option<&[f64]>,
    truth: Option<&[bool]>,
    pgm_dims: Option<(usize, usize)>,
    display_bounds: (f64, f64),
) -> Result<(), CliError> {
    let mut artifact_names: Vec<String> = Vec::new();
    for snap in &result.snapshots {
        let name = format!("snapshot_{:08}.csv", snap.step);
        export::write_conductance_csv(out.writer(&name)?, &snap.conductances_us)
            .map_err(run_err)?;
        artifact_names.push(name);
        if let Some((w, h)) = pgm_dims {
            if w * h == snap.conductances_us.len() {
                let name = format!("snapshot_{:08}.pgm", snap.step);
                export::write_pgm(
                    out.writer(&name)?,
                    &snap.conductances_us,
                    w,
                    h,
                    display_bounds.0,
                    display_bounds.1,
                )
                .map_err(run_err)?;
                artifact_names.push(name);
            }
        }
    }

    export::write_labels_csv(out.writer("labels.csv")?, &result.predicted_correlated)
        .map_err(run_err)?;
    artifact_names.push("labels.csv".to_string());
    if let Some(truth) = truth {
        export::write_labels_csv(out.writer("labels_truth.csv")?, truth).map_err(run_err)?;
        artifact_names.push("labels_truth.csv".to_string());
    }

    let mut metrics = KvMap::new();
    metrics.set("processes", &result.replica_means_us.len().to_string());
    metrics.set("replicas", &cfg.replicas_per_process.to_string());
    metrics.set("snapshots", &result.snapshots.len().to_string());
    metrics.set("pulses_applied", &result.pulses_applied.to_string());
    metrics.set("resolved_scale", &result.resolved_scale.to_string());
    metrics.set(
        "classify_threshold_us",
        &cfg.classify_threshold_us.to_string(),
    );
    metrics.set(
        "predicted_correlated",
        &result
            .predicted_correlated
            .iter()
            .filter(|&&b| b)
            .count()
            .to_string(),
    );
    if let Some(m) = &result.metrics {
        metrics.set("true_positives", &m.true_positives.to_string());
        metrics.set("false_positives", &m.false_positives.to_string());
        metrics.set("true_negatives", &m.true_negatives.to_string());
        metrics.set("false_negatives", &m.false_negatives.to_string());
        metrics.set("precision", &m.precision.to_string());
        metrics.set("recall", &m.recall.to_string());
        metrics.set("f1", &m.f1.to_string());
    }
    if let Some(truth) = truth {
        let corr: Vec<f64> = result
            .replica_means_us
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t)
            .map(|(&g, _)| g)
            .collect();
        let unc: Vec<f64> = result
            .replica_means_us
            .iter()
            .zip(truth)
            .filter(|(_, &t)| !t)
            .map(|(&g, _)| g)
            .collect();
        if !corr.is_empty() {
            metrics.set("mean_g_correlated_us", &baselines::kahan_mean(&corr).to_string());
        }
        if !unc.is_empty() {
            metrics.set(
                "mean_g_uncorrelated_us",
                &baselines::kahan_mean(&unc).to_string(),
            );
        }
    }
    if let Some(weights) = weights {
        export::write_weights_csv(out.writer("weights.csv")?, weights).map_err(run_err)?;
        artifact_names.push("weights.csv".to_string());
        let km = kmeans_1d(weights, 2).map_err(run_err)?;
        let km_flags = km.correlated_flags();
        let agree = km_flags
            .iter()
            .zip(&result.predicted_correlated)
            .filter(|(a, b)| a == b)
            .count();
        metrics.set(
            "kmeans_agreement",
            &(agree as f64 / km_flags.len() as f64).to_string(),
        );
        metrics.set("kmeans_centroid_low", &km.centroids[0].to_string());
        metrics.set("kmeans_centroid_high", &km.centroids[1].to_string());
    }
    fs::write(out.dir.join("metrics.kv"), metrics.to_text())
        .map_err(|e| CliError::Run(e.to_string()))?;
    artifact_names.push("metrics.kv".to_string());

    for name in &artifact_names {
        manifest
            .record_artifact(&out.dir, name)
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    manifest.write(&out.dir).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(())
}

fn run_synthetic(recipe: &Recipe, out: &OutDir) -> Result<(), CliError> {
    let (params, params_kv) = recipe.device_params()?;
    let kv = &recipe.kv;

    // Labels come from an image raster when one is configured.
    let image_labels = match kv.get_str_or("image", "") {
        "" => None,
        rel => {
            let path = recipe.resolve(rel);
            let bytes = fs::read(&path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let img = read_pbm(&bytes).map_err(config_err)?;
            Some(img)
        }
    };
    let mut ens_cfg = ensemble_config_from_kv(kv)?;
    let (labels, pgm_dims) = match &image_labels {
        Some(img) => {
            if img.n_pixels() != ens_cfg.n {
                return Err(CliError::Config(format!(
                    "image has {} pixels but n = {}",
                    img.n_pixels(),
                    ens_cfg.n
                )));
            }
            let (labels, count) = img.correlated_labels();
            ens_cfg.n_correlated = count;
            (labels, Some((img.width, img.height)))
        }
        None => {
            let mut labels = vec![false; ens_cfg.n];
            for flag in labels.iter_mut().take(ens_cfg.n_correlated) {
                *flag = true;
            }
            let dims = grid_dims(kv, ens_cfg.n)?;
            (labels, dims)
        }
    };
    let engine_cfg = engine_config_from_kv(kv)?;
    let master_seed = kv.get_u64_or("master_seed", 1)?;
    let baseline = kv.get_bool_or("baseline_weights", false)?;
    let export_cov = kv.get_bool_or("export_covariance", false)?;
    let cov_cap = kv.get_usize_or("covariance_cap", 1024)?;
    let two_means = read_classifier(kv)?;
    let display_lo = kv.get_f64_or("display_min_us", params.g_min_us)?;
    let display_hi = kv.get_f64_or("display_max_us", params.g_max_us)?;
    kv.ensure_fully_consumed()?;

    let mut source =
        ProcessEnsemble::with_labels(ens_cfg, labels.clone()).map_err(config_err)?;
    let mut array = ArraySim::new(ArrayConfig {
        n_devices: ens_cfg.n * engine_cfg.replicas_per_process,
        params,
        master_seed,
    })
    .map_err(config_err)?;
    let mut result = engine::run(&mut source, &mut array, &engine_cfg).map_err(run_err)?;
    if two_means {
        apply_two_means(&mut result, Some(&labels))?;
    }

    let weights = if baseline || export_cov {
        let mut again = ProcessEnsemble::with_labels(ens_cfg, labels.clone()).map_err(run_err)?;
        let w = weights_streaming(&mut again).map_err(run_err)?;
        Some(w.weights)
    } else {
        None
    };

    let mut manifest = Manifest::new("synthetic-correlation");
    manifest.embed("recipe.", kv);
    manifest.embed("device.", &params_kv);
    manifest.set_f64("resolved_scale", result.resolved_scale);
    if export_cov {
        let mut again = ProcessEnsemble::with_labels(ens_cfg, labels.clone()).map_err(run_err)?;
        let cov = baselines::covariance_matrix(&mut again, cov_cap).map_err(run_err)?;
        export::write_matrix_csv(out.writer("covariance.csv")?, &cov).map_err(run_err)?;
        manifest
            .record_artifact(&out.dir, "covariance.csv")
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    emit_correlation_artifacts(
        out,
        &mut manifest,
        &result,
        &engine_cfg,
        weights.as_deref(),
        Some(&labels),
        pgm_dims,
        (display_lo, display_hi),
    )
}

/// PGM dimensions: explicit grid keys win, then a perfect square.
fn grid_dims(kv: &KvMap, n: usize) -> Result<Option<(usize, usize)>, CliError> {
    let w = kv.get_usize_or("grid_width", 0)?;
    let h = kv.get_usize_or("grid_height", 0)?;
    if w > 0 && h > 0 {
        if w * h != n {
            return Err(CliError::Config(format!(
                "grid {w} x {h} does not cover {n} processes"
            )));
        }
        return Ok(Some((w, h)));
    }
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        Ok(Some((side, side)))
    } else {
        Ok(None)
    }
}

fn run_weather(recipe: &Recipe, out: &OutDir) -> Result<(), CliError> {
    let (params, params_kv) = recipe.device_params()?;
    let kv = &recipe.kv;
    let csv_path = recipe.resolve(kv.get_str("weather_csv")?);
    let lo = kv.get_f64_or("rate_band_lo", 0.0)?;
    let hi = kv.get_f64_or("rate_band_hi", 1.0)?;
    let k_steps = kv.get_usize_or("k_steps", 0)?;
    let engine_cfg = engine_config_from_kv(kv)?;
    let master_seed = kv.get_u64_or("master_seed", 1)?;
    let baseline = kv.get_bool_or("baseline_weights", true)?;
    let export_cov = kv.get_bool_or("export_covariance", false)?;
    let cov_cap = kv.get_usize_or("covariance_cap", 1024)?;
    let two_means = read_classifier(kv)?;
    let display_lo = kv.get_f64_or("display_min_us", params.g_min_us)?;
    let display_hi = kv.get_f64_or("display_max_us", params.g_max_us)?;
    let _ = kv.get_u64_or("seed", 0)?; // unused by a recorded source
    kv.ensure_fully_consumed()?;

    let file = File::open(&csv_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
    let table = binarize_weather(BufReader::new(file)).map_err(config_err)?;
    let table = select_stations(&table, lo, hi).map_err(run_err)?;

    let make_source = || {
        let src = table.to_source();
        if k_steps > 0 {
            src.truncated(k_steps)
        } else {
            src
        }
    };
    let mut source = make_source();
    let mut array = ArraySim::new(ArrayConfig {
        n_devices: table.n_stations() * engine_cfg.replicas_per_process,
        params,
        master_seed,
    })
    .map_err(config_err)?;
    let mut result = engine::run(&mut source, &mut array, &engine_cfg).map_err(run_err)?;
    if two_means {
        apply_two_means(&mut result, None)?;
    }

    let weights = if baseline || export_cov {
        let mut again = make_source();
        Some(weights_streaming(&mut again).map_err(run_err)?.weights)
    } else {
        None
    };

    let mut manifest = Manifest::new("weather-correlation");
    manifest.embed("recipe.", kv);
    manifest.embed("device.", &params_kv);
    manifest.set_usize("stations", table.n_stations());
    manifest.set_usize("hours", table.n_hours);
    manifest.set_usize("skipped_rows", table.skipped_rows);
    manifest.set_usize("dropped_stations", table.dropped_stations.len());
    manifest.set_f64("resolved_scale", result.resolved_scale);

    // Station table with positions, rates, and the engine's verdict.
    {
        use std::io::Write;
        let mut w = out.writer("stations.csv")?;
        writeln!(
            w,
            "station_id,latitude,longitude,event_rate,mean_conductance_uS,predicted_correlated"
        )
        .map_err(run_err)?;
        for (i, st) in table.stations.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                st.id,
                st.latitude,
                st.longitude,
                table.event_rate(i),
                result.replica_means_us[i],
                result.predicted_correlated[i] as u8
            )
            .map_err(run_err)?;
        }
    }
    manifest
        .record_artifact(&out.dir, "stations.csv")
        .map_err(|e| CliError::Run(e.to_string()))?;
    if export_cov {
        let mut again = make_source();
        let cov = baselines::covariance_matrix(&mut again, cov_cap).map_err(run_err)?;
        export::write_matrix_csv(out.writer("covariance.csv")?, &cov).map_err(run_err)?;
        manifest
            .record_artifact(&out.dir, "covariance.csv")
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    emit_correlation_artifacts(
        out,
        &mut manifest,
        &result,
        &engine_cfg,
        weights.as_deref(),
        None,
        None,
        (display_lo, display_hi),
    )
}

fn run_accumulation(recipe: &Recipe, out: &OutDir) -> Result<(), CliError> {
    let (params, params_kv) = recipe.device_params()?;
    let kv = &recipe.kv;
    let n_devices = kv.get_usize_or("n_devices", 1000)?;
    let currents = kv.get_f64_list("currents_ua")?;
    let n_pulses = kv.get_usize_or("n_pulses", 60)?;
    let pulse_duration = kv.get_f64_or("pulse_duration_ns", 50.0)?;
    let master_seed = kv.get_u64_or("master_seed", 1)?;
    // RESET stimulus is state re-initialization in the model; amplitude
    // and duration are recorded for provenance.
    let reset_amp = kv.get_f64_or("reset_amplitude_ua", 440.0)?;
    let reset_dur = kv.get_f64_or("reset_duration_ns", 1000.0)?;
    let _ = kv.get_u64_or("seed", 0)?;
    kv.ensure_fully_consumed()?;
    if n_devices == 0 || n_pulses == 0 {
        return Err(CliError::Config("n_devices and n_pulses must be >= 1".into()));
    }

    let all: Vec<usize> = (0..n_devices).collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(currents.len());
    for (ci, &amp) in currents.iter().enumerate() {
        let mut array = ArraySim::new(ArrayConfig {
            n_devices,
            params: params.clone(),
            master_seed: master_seed.wrapping_add(ci as u64),
        })
        .map_err(config_err)?;
        array.reset_all();
        let mut column = Vec::with_capacity(n_pulses + 1);
        column.push(baselines::kahan_mean(&array.read_all()));
        let pulse = Pulse::set(amp, pulse_duration);
        for _ in 0..n_pulses {
            array.pulse_subset(&all, &pulse).map_err(run_err)?;
            column.push(baselines::kahan_mean(&array.read_all()));
        }
        columns.push(column);
    }

    export::write_accumulation_csv(out.writer("curves.csv")?, &currents, &columns)
        .map_err(run_err)?;

    let mut metrics = KvMap::new();
    metrics.set("n_devices", &n_devices.to_string());
    metrics.set("n_pulses", &n_pulses.to_string());
    for (ci, &amp) in currents.iter().enumerate() {
        metrics.set(
            &format!("final_mean_uS_at_{amp}uA"),
            &columns[ci].last().unwrap().to_string(),
        );
    }
    fs::write(out.dir.join("metrics.kv"), metrics.to_text())
        .map_err(|e| CliError::Run(e.to_string()))?;

    let mut manifest = Manifest::new("accumulation-curve");
    manifest.embed("recipe.", kv);
    manifest.embed("device.", &params_kv);
    manifest.set_f64("reset_amplitude_ua", reset_amp);
    manifest.set_f64("reset_duration_ns", reset_dur);
    for name in ["curves.csv", "metrics.kv"] {
        manifest
            .record_artifact(&out.dir, name)
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    manifest.write(&out.dir).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(())
}

fn run_factor(recipe: &Recipe, out: &OutDir) -> Result<(), CliError> {
    let (params, params_kv) = recipe.device_params()?;
    let kv = &recipe.kv;
    let threshold = kv.get_f64_or("threshold_us", 2.0)?;
    let amplitude = kv.get_f64_or("amplitude_ua", 50.0)?;
    let x_max = kv.get_u64_or("x_max", 0)?;
    let y_max = kv.get_u64_or("y_max", 0)?;
    let queries: Vec<(u64, u64)> = if x_max > 0 && y_max > 0 {
        (1..=x_max)
            .flat_map(|x| (1..=y_max).map(move |y| (x, y)))
            .collect()
    } else {
        vec![(kv.get_u64("x")?, kv.get_u64("y")?)]
    };
    let _ = kv.get_u64_or("seed", 0)?;
    kv.ensure_fully_consumed()?;

    use std::io::Write;
    let mut w = out.writer("results.csv")?;
    writeln!(w, "x,y,device_says_factor,divisibility,match").map_err(run_err)?;
    let mut mismatches = 0usize;
    let mut last_x = 0;
    let mut probe = None;
    for (x, y) in &queries {
        if *x != last_x {
            probe = Some(
                apps::calibrate_factor_probe(*x, threshold, amplitude, &params)
                    .map_err(run_err)?,
            );
            last_x = *x;
        }
        let device = apps::is_factor(probe.as_ref().unwrap(), *y, &params).map_err(run_err)?;
        let arithmetic = y % x == 0;
        if device != arithmetic {
            mismatches += 1;
        }
        writeln!(
            w,
            "{x},{y},{},{},{}",
            device as u8,
            arithmetic as u8,
            (device == arithmetic) as u8
        )
        .map_err(run_err)?;
    }
    drop(w);

    let mut metrics = KvMap::new();
    metrics.set("queries", &queries.len().to_string());
    metrics.set("mismatches", &mismatches.to_string());
    metrics.set("threshold_us", &threshold.to_string());
    fs::write(out.dir.join("metrics.kv"), metrics.to_text())
        .map_err(|e| CliError::Run(e.to_string()))?;

    let mut manifest = Manifest::new("factor");
    manifest.embed("recipe.", kv);
    manifest.embed("device.", &params_kv);
    for name in ["results.csv", "metrics.kv"] {
        manifest
            .record_artifact(&out.dir, name)
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    manifest.write(&out.dir).map_err(|e| CliError::Run(e.to_string()))?;
    if mismatches > 0 {
        return Err(CliError::Run(format!(
            "{mismatches} factor queries disagree with divisibility"
        )));
    }
    Ok(())
}

fn run_matvec(recipe: &Recipe, out: &OutDir) -> Result<(), CliError> {
    let (params, params_kv) = recipe.device_params()?;
    let kv = &recipe.kv;
    let a_path = recipe.resolve(kv.get_str("matrix_csv")?);
    let x_path = recipe.resolve(kv.get_str("vector_csv")?);
    let opts = MatvecOptions {
        amplitude_ua: kv.get_f64_or("amplitude_ua", 50.0)?,
        reads_per_device: kv.get_usize_or("reads_per_device", 16)?,
        master_seed: kv.get_u64_or("master_seed", 1)?,
        scale_ns: None,
    };
    let oracle = kv.get_bool_or("oracle", true)?;
    let _ = kv.get_u64_or("seed", 0)?;
    kv.ensure_fully_consumed()?;

    let open = |p: &Path| -> Result<BufReader<File>, CliError> {
        Ok(BufReader::new(File::open(p).map_err(|e| {
            CliError::Config(format!("{}: {e}", p.display()))
        })?))
    };
    let a_rows = export::read_matrix_csv(open(&a_path)?).map_err(config_err)?;
    let x = export::read_vector_csv(open(&x_path)?).map_err(config_err)?;
    let a = DenseMatrix::from_rows(a_rows).map_err(config_err)?;
    let estimate = apps::matvec_estimate(&a, &x, &params, &opts).map_err(run_err)?;

    export::write_vector_csv(out.writer("estimate.csv")?, &estimate).map_err(run_err)?;

    let mut metrics = KvMap::new();
    metrics.set("rows", &a.rows().to_string());
    metrics.set("cols", &a.cols().to_string());
    metrics.set("reads_per_device", &opts.reads_per_device.to_string());
    if oracle {
        let exact = a.multiply(&x);
        export::write_vector_csv(out.writer("exact.csv")?, &exact).map_err(run_err)?;
        let err = apps::relative_l2_error(&estimate, &exact);
        metrics.set("relative_l2_error", &err.to_string());
    }
    fs::write(out.dir.join("metrics.kv"), metrics.to_text())
        .map_err(|e| CliError::Run(e.to_string()))?;

    let mut manifest = Manifest::new("matvec");
    manifest.embed("recipe.", kv);
    manifest.embed("device.", &params_kv);
    let mut names = vec!["estimate.csv", "metrics.kv"];
    if oracle {
        names.push("exact.csv");
    }
    for name in names {
        manifest
            .record_artifact(&out.dir, name)
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    manifest.write(&out.dir).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(())
}

/// Validate configuration files: device parameter files stand alone,
/// recipe files (recognized by a `kind` key) validate their referenced
/// configs too. Returns the violation report lines; empty means clean.
pub fn validate_paths(paths: &[PathBuf]) -> Vec<String> {
    let mut report = Vec::new();
    for path in paths {
        match validate_one(path) {
            Ok(()) => {}
            Err(e) => report.push(format!("{}: {e}", path.display())),
        }
    }
    report
}

fn validate_one(path: &Path) -> Result<(), CliError> {
    let kv = KvMap::from_file(path)?;
    if kv.contains("kind") {
        let recipe = Recipe::load(path)?;
        validate_recipe(&recipe)?;
    } else {
        let params = device_params_from_kv(&kv)?;
        params.validate().map_err(ConfigError::from)?;
        kv.ensure_fully_consumed()?;
    }
    Ok(())
}

fn validate_recipe(recipe: &Recipe) -> Result<(), CliError> {
    let kv = &recipe.kv;
    let _ = recipe.device_params()?;
    match recipe.kind.as_str() {
        "synthetic-correlation" => {
            let _ = ensemble_config_from_kv(kv)?;
            let _ = engine_config_from_kv(kv)?;
            if let Ok(rel) = kv.get_str("image") {
                let path = recipe.resolve(rel);
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "image `{}` does not exist",
                        path.display()
                    )));
                }
            }
        }
        "weather-correlation" => {
            let _ = engine_config_from_kv(kv)?;
            let path = recipe.resolve(kv.get_str("weather_csv")?);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "weather_csv `{}` does not exist",
                    path.display()
                )));
            }
        }
        "accumulation-curve" => {
            let _ = kv.get_f64_list("currents_ua")?;
        }
        "factor" => {
            let x_max = kv.get_u64_or("x_max", 0)?;
            let y_max = kv.get_u64_or("y_max", 0)?;
            if x_max == 0 || y_max == 0 {
                let _ = kv.get_u64("x")?;
                let _ = kv.get_u64("y")?;
            }
        }
        "matvec" => {
            for key in ["matrix_csv", "vector_csv"] {
                let path = recipe.resolve(kv.get_str(key)?);
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "{key} `{}` does not exist",
                        path.display()
                    )));
                }
            }
        }
        _ => {}
    }
    Ok(())
}
