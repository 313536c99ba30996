//! Key/value configuration files and typed loaders with validation.
//!
//! The format is deliberately small: `key = value` lines, `#` comments,
//! blank lines ignored. Sampled curves are inline (x, y) pair lists:
//!
//! ```text
//! rth_table_nm_k_per_uw = (0, 2.52) (60, 2.5) (120, 2.48)
//! ```
//!
//! Loaders pull typed values out of a parsed map, track which keys were
//! consumed so typos surface as unknown-key errors, and validate the
//! resulting structs, reporting the first violation with its key path.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use crate::device::DeviceParams;
use crate::engine::{EngineConfig, Modulation};
use crate::ensemble::EnsembleConfig;
use crate::table::LookupTable;

/// One failed invariant, addressed by the key path that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn prefixed(self, prefix: &str) -> Self {
        Self {
            path: format!("{prefix}{}", self.path),
            message: self.message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io { path: String, error: std::io::Error },
    Parse { line: usize, message: String },
    MissingKey { key: String },
    BadValue { key: String, message: String },
    UnknownKeys { keys: Vec<String> },
    Invalid(Violation),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, error } => write!(f, "{path}: {error}"),
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::MissingKey { key } => write!(f, "missing key `{key}`"),
            ConfigError::BadValue { key, message } => write!(f, "key `{key}`: {message}"),
            ConfigError::UnknownKeys { keys } => {
                write!(f, "unknown keys: {}", keys.join(", "))
            }
            ConfigError::Invalid(v) => write!(f, "{v}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<Violation> for ConfigError {
    fn from(v: Violation) -> Self {
        ConfigError::Invalid(v)
    }
}

/// An ordered key/value map with consumption tracking.
#[derive(Debug, Default)]
pub struct KvMap {
    entries: Vec<(String, String)>,
    index: HashMap<String, usize>,
    consumed: Mutex<HashSet<String>>,
}

impl Clone for KvMap {
    fn clone(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            index: self.index.clone(),
            consumed: Mutex::new(self.consumed.lock().unwrap().clone()),
        }
    }
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: i + 1,
                message: "expected `key = value`".to_string(),
            })?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
            {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    message: format!("bad key `{key}`"),
                });
            }
            map.set(key, value.trim());
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|error| ConfigError::Io {
            path: path.display().to_string(),
            error,
        })?;
        Self::parse(&text)
    }

    /// Insert or override a key (command-line `--set` lands here).
    pub fn set(&mut self, key: &str, value: &str) {
        match self.index.get(key) {
            Some(&i) => self.entries[i].1 = value.to_string(),
            None => {
                self.index.insert(key.to_string(), self.entries.len());
                self.entries.push((key.to_string(), value.to_string()));
            }
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.consumed.lock().unwrap().insert(key.to_string());
        self.index.get(key).map(|&i| self.entries[i].1.as_str())
    }

    pub fn get_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError::MissingKey {
            key: key.to_string(),
        })
    }

    pub fn get_str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, text: &str) -> Result<T, ConfigError> {
        text.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            message: format!("cannot parse `{text}`"),
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let text = self.get_str(key)?.to_string();
        self.parse_value(key, &text)
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(text) => {
                let text = text.to_string();
                self.parse_value(key, &text)
            }
            None => Ok(default),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<u64, ConfigError> {
        let text = self.get_str(key)?.to_string();
        self.parse_value(key, &text)
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            Some(text) => {
                let text = text.to_string();
                self.parse_value(key, &text)
            }
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let text = self.get_str(key)?.to_string();
        self.parse_value(key, &text)
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            Some(text) => {
                let text = text.to_string();
                self.parse_value(key, &text)
            }
            None => Ok(default),
        }
    }

    pub fn get_bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(ConfigError::BadValue {
                key: key.to_string(),
                message: format!("expected true/false, found `{other}`"),
            }),
            None => Ok(default),
        }
    }

    /// Inline (x, y) pair list, e.g. `(0, 1.5) (10, 2.0)`.
    pub fn get_pairs(&self, key: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
        let text = self.get_str(key)?.to_string();
        let bad = |message: &str| ConfigError::BadValue {
            key: key.to_string(),
            message: message.to_string(),
        };
        let mut pairs = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            if !rest.starts_with('(') {
                return Err(bad("expected `(x, y)` pair"));
            }
            let close = rest.find(')').ok_or_else(|| bad("unclosed pair"))?;
            let inner = &rest[1..close];
            let (x, y) = inner.split_once(',').ok_or_else(|| bad("pair needs two values"))?;
            let x: f64 = x
                .trim()
                .parse()
                .map_err(|_| bad(&format!("bad x value `{}`", x.trim())))?;
            let y: f64 = y
                .trim()
                .parse()
                .map_err(|_| bad(&format!("bad y value `{}`", y.trim())))?;
            pairs.push((x, y));
            rest = rest[close + 1..].trim_start();
        }
        if pairs.is_empty() {
            return Err(bad("empty pair list"));
        }
        Ok(pairs)
    }

    /// Space-separated float list.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let text = self.get_str(key)?.to_string();
        let mut out = Vec::new();
        for tok in text.split_whitespace() {
            out.push(self.parse_value(key, tok)?);
        }
        if out.is_empty() {
            return Err(ConfigError::BadValue {
                key: key.to_string(),
                message: "empty list".to_string(),
            });
        }
        Ok(out)
    }

    /// Keys never read by any getter; used to reject typos.
    pub fn unconsumed(&self) -> Vec<String> {
        let consumed = self.consumed.lock().unwrap();
        self.entries
            .iter()
            .map(|(k, _)| k.clone())
            .filter(|k| !consumed.contains(k))
            .collect()
    }

    pub fn ensure_fully_consumed(&self) -> Result<(), ConfigError> {
        let keys = self.unconsumed();
        if keys.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys { keys })
        }
    }

    /// Serialize in insertion order; parses back to an equal map.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

fn pairs_to_text(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("({x}, {y})"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn table_from_kv(kv: &KvMap, key: &str) -> Result<LookupTable, ConfigError> {
    let pairs = kv.get_pairs(key)?;
    LookupTable::new(pairs).map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        message: e.to_string(),
    })
}

/// Load device parameters; every key is required and all invariants are
/// checked, reporting the first violation with its key path.
pub fn device_params_from_kv(kv: &KvMap) -> Result<DeviceParams, ConfigError> {
    let params = DeviceParams {
        ua0_mean_nm: kv.get_f64("ua0_mean_nm")?,
        ua0_sigma_nm: kv.get_f64("ua0_sigma_nm")?,
        vg_table: table_from_kv(kv, "vg_table_k_nm_per_ns")?,
        rth_table: table_from_kv(kv, "rth_table_nm_k_per_uw")?,
        t_amb_k: kv.get_f64("t_amb_k")?,
        t_melt_k: kv.get_f64("t_melt_k")?,
        g_min_us: kv.get_f64("g_min_us")?,
        g_max_us: kv.get_f64("g_max_us")?,
        power_per_current_uw_per_ua: kv.get_f64("power_per_current_uw_per_ua")?,
        read_noise_rel: kv.get_f64("read_noise_rel")?,
        drift_nu: kv.get_f64("drift_nu")?,
        ode_step_ns: kv.get_f64("ode_step_ns")?,
    };
    params.validate()?;
    Ok(params)
}

pub fn device_params_to_kv(params: &DeviceParams) -> KvMap {
    let mut kv = KvMap::new();
    kv.set("ua0_mean_nm", &params.ua0_mean_nm.to_string());
    kv.set("ua0_sigma_nm", &params.ua0_sigma_nm.to_string());
    kv.set("vg_table_k_nm_per_ns", &pairs_to_text(params.vg_table.points()));
    kv.set("rth_table_nm_k_per_uw", &pairs_to_text(params.rth_table.points()));
    kv.set("t_amb_k", &params.t_amb_k.to_string());
    kv.set("t_melt_k", &params.t_melt_k.to_string());
    kv.set("g_min_us", &params.g_min_us.to_string());
    kv.set("g_max_us", &params.g_max_us.to_string());
    kv.set(
        "power_per_current_uw_per_ua",
        &params.power_per_current_uw_per_ua.to_string(),
    );
    kv.set("read_noise_rel", &params.read_noise_rel.to_string());
    kv.set("drift_nu", &params.drift_nu.to_string());
    kv.set("ode_step_ns", &params.ode_step_ns.to_string());
    kv
}

/// Engine keys are optional; absent keys take the published defaults.
pub fn engine_config_from_kv(kv: &KvMap) -> Result<EngineConfig, ConfigError> {
    let defaults = EngineConfig::default();
    let modulation = match kv.get_str_or("modulation", "amplitude") {
        "amplitude" => Modulation::Amplitude,
        "duration" => Modulation::Duration,
        other => {
            return Err(ConfigError::BadValue {
                key: "modulation".to_string(),
                message: format!("expected amplitude|duration, found `{other}`"),
            })
        }
    };
    let cfg = EngineConfig {
        modulation,
        current_scale_ua: kv.get_f64_or("current_scale_ua", defaults.current_scale_ua)?,
        pulse_duration_ns: kv.get_f64_or("pulse_duration_ns", defaults.pulse_duration_ns)?,
        duration_scale_ns: kv.get_f64_or("duration_scale_ns", defaults.duration_scale_ns)?,
        set_amplitude_ua: kv.get_f64_or("set_amplitude_ua", defaults.set_amplitude_ua)?,
        i_min_ua: kv.get_f64_or("i_min_ua", defaults.i_min_ua)?,
        i_max_ua: kv.get_f64_or("i_max_ua", defaults.i_max_ua)?,
        t_min_ns: kv.get_f64_or("t_min_ns", defaults.t_min_ns)?,
        t_max_ns: kv.get_f64_or("t_max_ns", defaults.t_max_ns)?,
        replicas_per_process: kv.get_usize_or("replicas", defaults.replicas_per_process)?,
        readout_period: kv.get_usize_or("readout_period", defaults.readout_period)?,
        classify_threshold_us: kv
            .get_f64_or("classify_threshold_us", defaults.classify_threshold_us)?,
        auto_scale: kv.get_bool_or("auto_scale", defaults.auto_scale)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Ensemble keys; `n_correlated` may be derived from an image instead,
/// so only the remaining keys are required.
pub fn ensemble_config_from_kv(kv: &KvMap) -> Result<EnsembleConfig, ConfigError> {
    let cfg = EnsembleConfig {
        n: kv.get_usize("n")?,
        n_correlated: kv.get_usize_or("n_correlated", 0)?,
        p: kv.get_f64("p")?,
        c: kv.get_f64("c")?,
        seed: kv.get_u64_or("seed", 0)?,
        k_steps: kv.get_usize("k_steps")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_pairs() {
        let kv = KvMap::parse(
            "# device\nua0_mean_nm = 60 # trailing comment\n\nvg = (0, 1) (5, 2.5)\n",
        )
        .unwrap();
        assert_eq!(kv.get_f64("ua0_mean_nm").unwrap(), 60.0);
        assert_eq!(kv.get_pairs("vg").unwrap(), vec![(0.0, 1.0), (5.0, 2.5)]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            KvMap::parse("just words\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            KvMap::parse("bad key! = 3\n"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn set_overrides_existing_keys() {
        let mut kv = KvMap::parse("a = 1\nb = 2\n").unwrap();
        kv.set("a", "7");
        assert_eq!(kv.get_f64("a").unwrap(), 7.0);
        assert_eq!(kv.entries().len(), 2);
    }

    #[test]
    fn unconsumed_keys_are_reported() {
        let kv = KvMap::parse("known = 1\ntypo_key = 2\n").unwrap();
        let _ = kv.get_f64("known").unwrap();
        match kv.ensure_fully_consumed() {
            Err(ConfigError::UnknownKeys { keys }) => assert_eq!(keys, vec!["typo_key"]),
            other => panic!("expected unknown keys, got {other:?}"),
        }
    }

    #[test]
    fn kv_text_round_trips() {
        let kv = KvMap::parse("a = 1\nb = (0, 2) (3, 4)\nc = hello\n").unwrap();
        let again = KvMap::parse(&kv.to_text()).unwrap();
        assert_eq!(kv.entries(), again.entries());
    }

    #[test]
    fn device_params_round_trip_through_kv() {
        let params = DeviceParams::default();
        let kv = device_params_to_kv(&params);
        let parsed = device_params_from_kv(&kv).unwrap();
        assert_eq!(parsed, params);
        kv.ensure_fully_consumed().unwrap();
    }

    #[test]
    fn device_loader_reports_violation_with_key_path() {
        let params = DeviceParams::default();
        let mut kv = device_params_to_kv(&params);
        kv.set("g_min_us", "30"); // above g_max
        match device_params_from_kv(&kv) {
            Err(ConfigError::Invalid(v)) => assert_eq!(v.path, "g_max_us"),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn engine_defaults_match_published_constants() {
        let kv = KvMap::parse("").unwrap();
        let cfg = engine_config_from_kv(&kv).unwrap();
        assert_eq!(cfg.current_scale_ua, 0.002);
        assert_eq!(cfg.pulse_duration_ns, 50.0);
        assert_eq!(cfg.i_min_ua, 25.0);
        assert_eq!(cfg.i_max_ua, 80.0);
        assert_eq!(cfg.classify_threshold_us, 2.0);
    }

    #[test]
    fn engine_loader_rejects_inverted_floor_and_ceiling() {
        let kv = KvMap::parse("i_min_ua = 90\ni_max_ua = 80\n").unwrap();
        match engine_config_from_kv(&kv) {
            Err(ConfigError::Invalid(v)) => {
                assert_eq!(v.path, "i_min_ua");
                assert!(v.message.contains("i_max_ua"));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn infinity_parses_for_open_ceilings() {
        let kv = KvMap::parse("t_max_ns = inf\n").unwrap();
        let cfg = engine_config_from_kv(&kv).unwrap();
        assert!(cfg.t_max_ns.is_infinite());
    }
}
