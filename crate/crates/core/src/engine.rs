//! The correlation detector: per-step collective momentum, a shared
//! write pulse scheduled linearly in the momentum, replica handling,
//! periodic readout, and conductance-threshold classification.
//!
//! At each step the momentum M(k) counts the active processes. A single
//! SET pulse proportional to M(k) is applied to every device whose
//! process is active, subject to a programming floor and ceiling.
//! Processes that co-fire therefore accumulate conductance at a rate
//! that grows with the size and correlation of their group, which
//! separates them from the uncorrelated background.

use crate::array::{ArrayError, ArraySim};
use crate::baselines::KahanSum;
use crate::bits::BitVec;
use crate::config::Violation;
use crate::device::Pulse;
use crate::ensemble::ProcessSource;

/// Which pulse attribute the momentum modulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    /// Fixed duration, amplitude = current_scale * M. Matches write
    /// circuitry that programs with a current DAC at a fixed width.
    Amplitude,
    /// Fixed amplitude, duration = duration_scale * M. In constant
    /// growth the accumulated thickness change is then exactly linear
    /// in the momentum sum.
    Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub modulation: Modulation,
    /// uA of SET current per unit momentum (amplitude mode).
    pub current_scale_ua: f64,
    /// Fixed pulse duration in amplitude mode (ns).
    pub pulse_duration_ns: f64,
    /// ns of pulse duration per unit momentum (duration mode).
    pub duration_scale_ns: f64,
    /// Fixed amplitude in duration mode (uA).
    pub set_amplitude_ua: f64,
    /// Programming floor: no pulse below this amplitude (uA).
    pub i_min_ua: f64,
    /// Amplitude ceiling (uA).
    pub i_max_ua: f64,
    /// Duration floor in duration mode (ns); 0 disables the floor.
    pub t_min_ns: f64,
    /// Duration ceiling in duration mode (ns).
    pub t_max_ns: f64,
    /// Devices per process, averaged at readout.
    pub replicas_per_process: usize,
    /// Steps between conductance snapshots.
    pub readout_period: usize,
    /// Classification threshold on the replica-mean conductance (uS).
    pub classify_threshold_us: f64,
    /// Derive the momentum scale from the source so that the expected
    /// momentum N*p maps to 0.8 * the programming floor.
    pub auto_scale: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            modulation: Modulation::Amplitude,
            current_scale_ua: 0.002,
            pulse_duration_ns: 50.0,
            duration_scale_ns: 0.05,
            set_amplitude_ua: 50.0,
            i_min_ua: 25.0,
            i_max_ua: 80.0,
            t_min_ns: 0.0,
            t_max_ns: f64::INFINITY,
            replicas_per_process: 1,
            readout_period: 100,
            classify_threshold_us: 2.0,
            auto_scale: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), Violation> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.i_min_ua > 0.0 && self.i_min_ua <= self.i_max_ua && self.i_max_ua.is_finite()) {
            return Err(Violation::new(
                "i_min_ua",
                "floor must satisfy 0 < i_min_ua <= i_max_ua",
            ));
        }
        if !(self.pulse_duration_ns.is_finite() && self.pulse_duration_ns > 0.0) {
            return Err(Violation::new("pulse_duration_ns", "must be > 0"));
        }
        if !finite_nonneg(self.current_scale_ua) {
            return Err(Violation::new("current_scale_ua", "must be >= 0"));
        }
        if !finite_nonneg(self.duration_scale_ns) {
            return Err(Violation::new("duration_scale_ns", "must be >= 0"));
        }
        if !finite_nonneg(self.set_amplitude_ua) {
            return Err(Violation::new("set_amplitude_ua", "must be >= 0"));
        }
        if !(finite_nonneg(self.t_min_ns) && self.t_min_ns <= self.t_max_ns) {
            return Err(Violation::new(
                "t_min_ns",
                "duration floor must satisfy 0 <= t_min_ns <= t_max_ns",
            ));
        }
        if self.replicas_per_process == 0 {
            return Err(Violation::new("replicas", "must be >= 1"));
        }
        if self.readout_period == 0 {
            return Err(Violation::new("readout_period", "must be >= 1"));
        }
        if !self.classify_threshold_us.is_finite() {
            return Err(Violation::new("classify_threshold_us", "must be finite"));
        }
        Ok(())
    }

    /// Resolve auto scaling against a source: the expected momentum
    /// `n * rate` is mapped to 0.8 of the relevant floor.
    pub fn resolved_for<S: ProcessSource>(&self, source: &S) -> Result<EngineConfig, Violation> {
        let mut cfg = self.clone();
        if !self.auto_scale {
            return Ok(cfg);
        }
        let expected_m = source.n_processes() as f64 * source.mean_rate();
        if expected_m <= 0.0 {
            return Err(Violation::new(
                "auto_scale",
                "needs a source with positive expected momentum",
            ));
        }
        match self.modulation {
            Modulation::Amplitude => {
                cfg.current_scale_ua = 0.8 * self.i_min_ua / expected_m;
            }
            Modulation::Duration => {
                if self.t_min_ns <= 0.0 {
                    return Err(Violation::new(
                        "auto_scale",
                        "duration mode requires t_min_ns > 0",
                    ));
                }
                cfg.duration_scale_ns = 0.8 * self.t_min_ns / expected_m;
            }
        }
        Ok(cfg)
    }
}

/// Collective momentum: the number of active processes at one step.
pub fn momentum(x: &BitVec) -> usize {
    x.count_ones()
}

/// Schedule the shared SET pulse for a momentum value, or nothing when
/// the modulated quantity falls below the programming floor.
pub fn schedule_pulse(m: usize, cfg: &EngineConfig) -> Option<Pulse> {
    if m == 0 {
        return None;
    }
    match cfg.modulation {
        Modulation::Amplitude => {
            let raw = cfg.current_scale_ua * m as f64;
            if raw < cfg.i_min_ua {
                return None;
            }
            Some(Pulse::set(raw.min(cfg.i_max_ua), cfg.pulse_duration_ns))
        }
        Modulation::Duration => {
            let raw = cfg.duration_scale_ns * m as f64;
            if raw < cfg.t_min_ns || raw <= 0.0 {
                return None;
            }
            Some(Pulse::set(cfg.set_amplitude_ua, raw.min(cfg.t_max_ns)))
        }
    }
}

/// Threshold classification; the boundary value counts as correlated.
pub fn classify(replica_means_us: &[f64], threshold_us: f64) -> Vec<bool> {
    replica_means_us.iter().map(|&g| g >= threshold_us).collect()
}

/// Alternative classifier: split the conductances with 1-D two-means
/// clustering instead of a fixed threshold; the upper cluster is the
/// correlated class.
pub fn classify_two_means(
    replica_means_us: &[f64],
) -> Result<Vec<bool>, crate::baselines::BaselineError> {
    Ok(crate::baselines::kmeans_1d(replica_means_us, 2)?.correlated_flags())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassificationMetrics {
    /// Confusion counts and derived rates; empty denominators yield 0.
    pub fn from_predictions(predicted: &[bool], truth: &[bool]) -> Self {
        assert_eq!(predicted.len(), truth.len());
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fn_ = 0;
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// One periodic conductance readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Number of steps completed when the readout was taken (1-based).
    pub step: usize,
    pub conductances_us: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    /// Final per-process conductance, averaged over replicas (uS).
    pub replica_means_us: Vec<f64>,
    pub predicted_correlated: Vec<bool>,
    /// Metrics against ground truth, when the source carries labels.
    pub metrics: Option<ClassificationMetrics>,
    /// Momentum scale actually used (after auto scaling).
    pub resolved_scale: f64,
    /// Steps at which a pulse cleared the programming floor.
    pub pulses_applied: usize,
}

#[derive(Debug)]
pub enum EngineError {
    InvalidConfig(Violation),
    SizeMismatch {
        n_devices: usize,
        n_processes: usize,
        replicas: usize,
    },
    SourceExhausted {
        expected: usize,
        got: usize,
    },
    Array(ArrayError),
}

impl std::fmt::Display for EngineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineError::InvalidConfig(v) => write!(f, "invalid engine config: {v}"),
            EngineError::SizeMismatch {
                n_devices,
                n_processes,
                replicas,
            } => write!(
                f,
                "array has {n_devices} devices but {n_processes} processes x {replicas} replicas are required"
            ),
            EngineError::SourceExhausted { expected, got } => {
                write!(f, "source ended after {got} of {expected} steps")
            }
            EngineError::Array(e) => write!(f, "array error: {e}"),
        }
    }
}

impl std::error::Error for EngineError {}

impl From<ArrayError> for EngineError {
    fn from(e: ArrayError) -> Self {
        EngineError::Array(e)
    }
}

/// Execute one detection epoch: RESET the array, stream the source,
/// pulse the replicas of active processes, snapshot periodically, and
/// classify from the final snapshot.
pub fn run<S: ProcessSource>(
    source: &mut S,
    array: &mut ArraySim,
    cfg: &EngineConfig,
) -> Result<RunResult, EngineError> {
    cfg.validate().map_err(EngineError::InvalidConfig)?;
    let cfg = cfg.resolved_for(source).map_err(EngineError::InvalidConfig)?;
    let n = source.n_processes();
    let d = cfg.replicas_per_process;
    let k_total = source.total_steps();
    if array.n_devices() != n * d {
        return Err(EngineError::SizeMismatch {
            n_devices: array.n_devices(),
            n_processes: n,
            replicas: d,
        });
    }

    array.reset_all();
    let mut snapshots = Vec::with_capacity(k_total.div_ceil(cfg.readout_period));
    let mut ids: Vec<usize> = Vec::new();
    let mut pulses_applied = 0usize;
    for k in 0..k_total {
        let x = source.next_step().ok_or(EngineError::SourceExhausted {
            expected: k_total,
            got: k,
        })?;
        let m = momentum(x);
        let pulse = schedule_pulse(m, &cfg);
        if let Some(pulse) = pulse {
            ids.clear();
            for i in x.ones() {
                for r in 0..d {
                    ids.push(i * d + r);
                }
            }
            array.pulse_subset(&ids, &pulse)?;
            pulses_applied += 1;
        }
        if (k + 1) % cfg.readout_period == 0 || k + 1 == k_total {
            snapshots.push(Snapshot {
                step: k + 1,
                conductances_us: array.read_all(),
            });
        }
    }

    let last = &snapshots.last().expect("k_total >= 1 yields a snapshot").conductances_us;
    let replica_means_us: Vec<f64> = (0..n)
        .map(|i| {
            let mut s = KahanSum::default();
            for r in 0..d {
                s.add(last[i * d + r]);
            }
            s.value() / d as f64
        })
        .collect();
    let predicted_correlated = classify(&replica_means_us, cfg.classify_threshold_us);
    let metrics = source
        .labels()
        .map(|truth| ClassificationMetrics::from_predictions(&predicted_correlated, truth));
    let resolved_scale = match cfg.modulation {
        Modulation::Amplitude => cfg.current_scale_ua,
        Modulation::Duration => cfg.duration_scale_ns,
    };
    Ok(RunResult {
        snapshots,
        replica_means_us,
        predicted_correlated,
        metrics,
        resolved_scale,
        pulses_applied,
    })
}
