//! Correlated binary stochastic process generation.
//!
//! N processes share a hidden reference process with rate `p`. At each
//! step, processes in the correlated subset fire with probability
//! `p + sqrt(c)(1 - p)` when the reference fires and `p(1 - sqrt(c))`
//! when it does not; uncorrelated processes fire i.i.d. at rate `p`.
//! Every process then has mean `p` and variance `p(1 - p)`, and any two
//! correlated processes have pairwise correlation `c`.
//!
//! Emission is streaming, one step at a time; the full K x N matrix is
//! never materialized. Per-process keyed substreams make generation of
//! one step parallel and deterministic.

use rayon::prelude::*;

use crate::bits::BitVec;
use crate::config::Violation;
use crate::rng;

/// Stream id reserved for the hidden reference process.
const REFERENCE_STREAM: u64 = u64::MAX;

/// Below this process count a step is filled serially; the output is
/// identical either way.
const PARALLEL_FILL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    /// Total number of processes N.
    pub n: usize,
    /// Size of the correlated subset.
    pub n_correlated: usize,
    /// Marginal firing probability p.
    pub p: f64,
    /// Pairwise correlation c of the correlated subset.
    pub c: f64,
    pub seed: u64,
    /// Number of steps K the ensemble emits.
    pub k_steps: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), Violation> {
        if self.n == 0 {
            return Err(Violation::new("n", "must be >= 1"));
        }
        if self.n_correlated > self.n {
            return Err(Violation::new("n_correlated", "must not exceed n"));
        }
        if !self.p.is_finite() || !(0.0..=0.5).contains(&self.p) {
            return Err(Violation::new("p", "must lie in [0, 0.5]"));
        }
        if !self.c.is_finite() || !(0.0..=1.0).contains(&self.c) {
            return Err(Violation::new("c", "must lie in [0, 1]"));
        }
        if self.k_steps == 0 {
            return Err(Violation::new("k_steps", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum EnsembleError {
    Invalid(Violation),
    LabelLengthMismatch { labels: usize, n: usize },
    LabelCountMismatch { labeled: usize, n_correlated: usize },
}

impl std::fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleError::Invalid(v) => write!(f, "invalid ensemble config: {v}"),
            EnsembleError::LabelLengthMismatch { labels, n } => {
                write!(f, "label vector has {labels} entries for {n} processes")
            }
            EnsembleError::LabelCountMismatch { labeled, n_correlated } => write!(
                f,
                "labels mark {labeled} correlated processes but n_correlated = {n_correlated}"
            ),
        }
    }
}

impl std::error::Error for EnsembleError {}

/// Anything that emits a fixed number of activity bit-vectors.
///
/// The correlation engine and the analytic baselines both consume
/// sources, so a synthetic ensemble and a recorded table (for example
/// binarized weather data) are interchangeable.
pub trait ProcessSource {
    fn n_processes(&self) -> usize;
    fn total_steps(&self) -> usize;
    /// Expected (or empirical) per-process firing rate; drives auto
    /// scaling of the pulse schedule.
    fn mean_rate(&self) -> f64;
    /// Ground-truth correlated flags, when known.
    fn labels(&self) -> Option<&[bool]>;
    /// Emit the next step, or `None` once exhausted.
    fn next_step(&mut self) -> Option<&BitVec>;
}

/// Streaming generator of N correlated/uncorrelated binary processes.
pub struct ProcessEnsemble {
    config: EnsembleConfig,
    labels: Vec<bool>,
    stream_keys: Vec<u64>,
    reference_key: u64,
    thr_base: u64,
    thr_active: u64,
    thr_idle: u64,
    next_k: usize,
    current: BitVec,
}

impl ProcessEnsemble {
    /// Ensemble whose correlated subset is the first `n_correlated`
    /// processes.
    pub fn synthetic(config: EnsembleConfig) -> Result<Self, EnsembleError> {
        let mut labels = vec![false; config.n];
        for flag in labels.iter_mut().take(config.n_correlated) {
            *flag = true;
        }
        Self::with_labels(config, labels)
    }

    /// Ensemble with an explicit correlated-subset label per process.
    pub fn with_labels(config: EnsembleConfig, labels: Vec<bool>) -> Result<Self, EnsembleError> {
        config.validate().map_err(EnsembleError::Invalid)?;
        if labels.len() != config.n {
            return Err(EnsembleError::LabelLengthMismatch {
                labels: labels.len(),
                n: config.n,
            });
        }
        let labeled = labels.iter().filter(|&&b| b).count();
        if labeled != config.n_correlated {
            return Err(EnsembleError::LabelCountMismatch {
                labeled,
                n_correlated: config.n_correlated,
            });
        }
        let sqrt_c = config.c.sqrt();
        let q_active = config.p + sqrt_c * (1.0 - config.p);
        let q_idle = config.p * (1.0 - sqrt_c);
        let stream_keys = (0..config.n as u64)
            .map(|i| rng::stream_key(config.seed, i))
            .collect();
        Ok(Self {
            labels,
            stream_keys,
            reference_key: rng::stream_key(config.seed, REFERENCE_STREAM),
            thr_base: rng::bernoulli_threshold(config.p),
            thr_active: rng::bernoulli_threshold(q_active),
            thr_idle: rng::bernoulli_threshold(q_idle),
            next_k: 0,
            current: BitVec::zeros(config.n),
            config,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    /// Conditional firing probability of a correlated process given the
    /// reference fired.
    pub fn q_active(&self) -> f64 {
        self.config.p + self.config.c.sqrt() * (1.0 - self.config.p)
    }

    /// Conditional firing probability of a correlated process given the
    /// reference did not fire.
    pub fn q_idle(&self) -> f64 {
        self.config.p * (1.0 - self.config.c.sqrt())
    }

    /// Whether the hidden reference process fires at step `k`.
    pub fn reference_fires(&self, k: usize) -> bool {
        rng::fires(rng::event_u64(self.reference_key, k as u64), self.thr_base)
    }

    pub fn steps_emitted(&self) -> usize {
        self.next_k
    }

    fn fill_step(&mut self, k: usize) {
        let (thr_corr, thr_unc) = if self.reference_fires(k) {
            (self.thr_active, self.thr_base)
        } else {
            (self.thr_idle, self.thr_base)
        };
        let n = self.config.n;
        let labels = &self.labels;
        let keys = &self.stream_keys;
        let fill_word = |w: usize| -> u64 {
            let mut word = 0u64;
            let base = w * 64;
            let top = 64.min(n - base);
            for b in 0..top {
                let i = base + b;
                let thr = if labels[i] { thr_corr } else { thr_unc };
                if rng::fires(rng::event_u64(keys[i], k as u64), thr) {
                    word |= 1 << b;
                }
            }
            word
        };
        if n >= PARALLEL_FILL_THRESHOLD {
            self.current
                .words_mut()
                .par_iter_mut()
                .enumerate()
                .for_each(|(w, out)| *out = fill_word(w));
        } else {
            for (w, out) in self.current.words_mut().iter_mut().enumerate() {
                *out = fill_word(w);
            }
        }
    }
}

impl ProcessSource for ProcessEnsemble {
    fn n_processes(&self) -> usize {
        self.config.n
    }

    fn total_steps(&self) -> usize {
        self.config.k_steps
    }

    fn mean_rate(&self) -> f64 {
        self.config.p
    }

    fn labels(&self) -> Option<&[bool]> {
        Some(&self.labels)
    }

    fn next_step(&mut self) -> Option<&BitVec> {
        if self.next_k >= self.config.k_steps {
            return None;
        }
        let k = self.next_k;
        self.fill_step(k);
        self.next_k += 1;
        Some(&self.current)
    }
}

/// A pre-recorded source: one bit-vector per step.
pub struct TableSource {
    steps: Vec<BitVec>,
    n: usize,
    mean_rate: f64,
    labels: Option<Vec<bool>>,
    next: usize,
}

impl TableSource {
    /// Build from per-process rows (process major, step minor).
    pub fn from_rows(rows: &[BitVec]) -> Self {
        let n = rows.len();
        let steps_total = rows.first().map_or(0, |r| r.len());
        let mut steps = Vec::with_capacity(steps_total);
        let mut ones = 0usize;
        for k in 0..steps_total {
            let mut v = BitVec::zeros(n);
            for (i, row) in rows.iter().enumerate() {
                if row.get(k) {
                    v.set(i, true);
                    ones += 1;
                }
            }
            steps.push(v);
        }
        let mean_rate = if n * steps_total == 0 {
            0.0
        } else {
            ones as f64 / (n * steps_total) as f64
        };
        Self {
            steps,
            n,
            mean_rate,
            labels: None,
            next: 0,
        }
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Self {
        assert_eq!(labels.len(), self.n);
        self.labels = Some(labels);
        self
    }

    /// Keep only the first `k` steps.
    pub fn truncated(mut self, k: usize) -> Self {
        self.steps.truncate(k);
        self
    }
}

impl ProcessSource for TableSource {
    fn n_processes(&self) -> usize {
        self.n
    }

    fn total_steps(&self) -> usize {
        self.steps.len()
    }

    fn mean_rate(&self) -> f64 {
        self.mean_rate
    }

    fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    fn next_step(&mut self) -> Option<&BitVec> {
        let step = self.steps.get(self.next)?;
        self.next += 1;
        Some(step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, n_c: usize, p: f64, c: f64, seed: u64, k: usize) -> EnsembleConfig {
        EnsembleConfig {
            n,
            n_correlated: n_c,
            p,
            c,
            seed,
            k_steps: k,
        }
    }

    #[test]
    fn validation_rejects_bad_domains() {
        assert!(ProcessEnsemble::synthetic(cfg(10, 11, 0.1, 0.1, 0, 5)).is_err());
        assert!(ProcessEnsemble::synthetic(cfg(10, 2, 0.6, 0.1, 0, 5)).is_err());
        assert!(ProcessEnsemble::synthetic(cfg(10, 2, 0.1, 1.5, 0, 5)).is_err());
        assert!(ProcessEnsemble::synthetic(cfg(0, 0, 0.1, 0.1, 0, 5)).is_err());
    }

    #[test]
    fn same_seed_replays_identical_streams() {
        let mut a = ProcessEnsemble::synthetic(cfg(100, 20, 0.2, 0.3, 7, 50)).unwrap();
        let mut b = ProcessEnsemble::synthetic(cfg(100, 20, 0.2, 0.3, 7, 50)).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_step().unwrap(), b.next_step().unwrap());
        }
        assert!(a.next_step().is_none());
    }

    #[test]
    fn full_correlation_copies_the_reference() {
        let mut e = ProcessEnsemble::synthetic(cfg(64, 32, 0.3, 1.0, 42, 200)).unwrap();
        for k in 0..200 {
            let r = e.reference_fires(k);
            let x = e.next_step().unwrap();
            for i in 0..32 {
                assert_eq!(x.get(i), r, "correlated process {i} at step {k}");
            }
        }
    }

    #[test]
    fn zero_correlation_collapses_the_conditionals() {
        let e = ProcessEnsemble::synthetic(cfg(8, 4, 0.25, 0.0, 1, 4)).unwrap();
        assert_eq!(e.q_active(), 0.25);
        assert_eq!(e.q_idle(), 0.25);
    }

    #[test]
    fn joint_firing_probability_matches_analytic_enumeration() {
        // p = 0.5, c = 0.25: conditioning on the two reference branches,
        //   P(Xi = Xj = 1) = 0.5 * q_active^2 + 0.5 * q_idle^2
        //                  = 0.5 * 0.75^2 + 0.5 * 0.25^2 = 0.3125,
        // so Cov = 0.0625 and the correlation is exactly 0.25.
        let config = cfg(2, 2, 0.5, 0.25, 33, 200_000);
        let e = ProcessEnsemble::synthetic(config).unwrap();
        let joint = 0.5 * e.q_active().powi(2) + 0.5 * e.q_idle().powi(2);
        assert!((joint - 0.3125).abs() < 1e-15);
        let analytic_corr = (joint - 0.25) / 0.25;
        assert!((analytic_corr - 0.25).abs() < 1e-15);

        let mut e = ProcessEnsemble::synthetic(config).unwrap();
        let mut n11 = 0u64;
        let k = config.k_steps;
        while let Some(x) = e.next_step() {
            if x.get(0) && x.get(1) {
                n11 += 1;
            }
        }
        let emp = n11 as f64 / k as f64;
        // 3 sigma on a Bernoulli(0.3125) frequency.
        let tol = 3.0 * (0.3125f64 * (1.0 - 0.3125) / k as f64).sqrt();
        assert!((emp - 0.3125).abs() < tol, "empirical joint {emp}");
    }

    #[test]
    fn marginal_moments_match_for_both_groups() {
        let config = cfg(40, 20, 0.07, 0.4, 11, 100_000);
        let mut e = ProcessEnsemble::synthetic(config).unwrap();
        let mut counts = vec![0u64; config.n];
        while let Some(x) = e.next_step() {
            for i in x.ones() {
                counts[i] += 1;
            }
        }
        let tol = 3.0 * (config.p * (1.0 - config.p) / config.k_steps as f64).sqrt();
        let mut outside = 0;
        for &c in &counts {
            let mean = c as f64 / config.k_steps as f64;
            if (mean - config.p).abs() > tol {
                outside += 1;
            }
        }
        // A 3 sigma band leaves ~0.27% outside by construction.
        assert!(outside <= 2, "{outside} of 40 processes outside 3 sigma");
    }

    #[test]
    fn pairwise_correlations_converge_to_c_and_zero() {
        let config = cfg(30, 10, 0.1, 0.3, 5, 100_000);
        let mut e = ProcessEnsemble::synthetic(config).unwrap();
        let n = config.n;
        let mut counts = vec![0u64; n];
        // Joint counts for three representative pairs.
        let pairs = [(0usize, 1usize), (0, 15), (15, 20)];
        let mut joint = [0u64; 3];
        while let Some(x) = e.next_step() {
            for i in x.ones() {
                counts[i] += 1;
            }
            for (slot, &(a, b)) in joint.iter_mut().zip(&pairs) {
                if x.get(a) && x.get(b) {
                    *slot += 1;
                }
            }
        }
        let k = config.k_steps as f64;
        let corr = |idx: usize| {
            let (a, b) = pairs[idx];
            let pa = counts[a] as f64 / k;
            let pb = counts[b] as f64 / k;
            let j = joint[idx] as f64 / k;
            (j - pa * pb) / (pa * (1.0 - pa) * pb * (1.0 - pb)).sqrt()
        };
        // Standard error of a correlation estimate at K = 1e5 is ~3e-3.
        assert!((corr(0) - 0.3).abs() < 0.02, "corr pair {}", corr(0));
        assert!(corr(1).abs() < 0.02, "cross pair {}", corr(1));
        assert!(corr(2).abs() < 0.02, "uncorrelated pair {}", corr(2));
    }

    #[test]
    fn table_source_replays_rows() {
        let rows = vec![
            BitVec::from_bools(&[true, false, true]),
            BitVec::from_bools(&[false, false, true]),
        ];
        let mut src = TableSource::from_rows(&rows);
        assert_eq!(src.n_processes(), 2);
        assert_eq!(src.total_steps(), 3);
        assert!((src.mean_rate() - 3.0 / 6.0).abs() < 1e-15);
        assert_eq!(src.next_step().unwrap(), &BitVec::from_bools(&[true, false]));
        assert_eq!(src.next_step().unwrap(), &BitVec::from_bools(&[false, false]));
        assert_eq!(src.next_step().unwrap(), &BitVec::from_bools(&[true, true]));
        assert!(src.next_step().is_none());
    }
}
