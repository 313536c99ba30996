//! Exact analytic references: uncentered-covariance weights, their
//! closed-form expectations, and 1-D k-means clustering.
//!
//! The per-process weight is the row sum of the uncentered covariance
//! matrix, computed in one streaming pass through the identity
//!
//! ```text
//! W_i = sum_j R_ij = (1/K) * sum_k X_i(k) * M(k),   M(k) = sum_j X_j(k).
//! ```
//!
//! Per-step products of binary processes are integers, so the weights
//! accumulate in `u64` and are exact and independent of reduction order.

use crate::bits::BitVec;
use crate::ensemble::ProcessSource;

#[derive(Debug)]
pub enum BaselineError {
    EmptyStream,
    TooFewDistinctValues { distinct: usize, k: usize },
    NonFiniteValue { index: usize },
    MatrixTooLarge { n: usize, cap: usize },
    DegenerateGroup,
}

impl std::fmt::Display for BaselineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineError::EmptyStream => write!(f, "weights need at least one step"),
            BaselineError::TooFewDistinctValues { distinct, k } => {
                write!(f, "k-means needs {k} distinct values, found {distinct}")
            }
            BaselineError::NonFiniteValue { index } => {
                write!(f, "non-finite value at index {index}")
            }
            BaselineError::MatrixTooLarge { n, cap } => {
                write!(f, "covariance matrix for {n} processes exceeds cap {cap}")
            }
            BaselineError::DegenerateGroup => {
                write!(f, "group moments need both a correlated and an uncorrelated process")
            }
        }
    }
}

impl std::error::Error for BaselineError {}

/// Exact per-process weights from one pass over a source.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub k_steps: usize,
}

pub fn weights_streaming<S: ProcessSource>(source: &mut S) -> Result<WeightVector, BaselineError> {
    let n = source.n_processes();
    let mut acc = vec![0u64; n];
    let mut k = 0usize;
    while let Some(x) = source.next_step() {
        let m = x.count_ones() as u64;
        for i in x.ones() {
            acc[i] += m;
        }
        k += 1;
    }
    if k == 0 {
        return Err(BaselineError::EmptyStream);
    }
    Ok(WeightVector {
        weights: acc.iter().map(|&a| a as f64 / k as f64).collect(),
        k_steps: k,
    })
}

/// Closed-form expected weights (correlated mean, uncorrelated mean):
///
/// ```text
/// E[W | correlated]   = (N-1) p^2 + p + (N_c - 1) c p (1-p)
/// E[W | uncorrelated] = (N-1) p^2 + p
/// ```
pub fn expected_weights(n: usize, n_correlated: usize, p: f64, c: f64) -> (f64, f64) {
    let base = (n as f64 - 1.0) * p * p + p;
    let extra = n_correlated.saturating_sub(1) as f64 * c * p * (1.0 - p);
    (base + extra, base)
}

/// Mean and standard deviation of a group-averaged weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupWeightMoments {
    pub mean: f64,
    /// Standard deviation of the group mean over realizations. The group
    /// mean is (1/K) sum_k of an i.i.d. per-step statistic, so this is
    /// sqrt(Var_step / K) / group size.
    pub std_of_mean: f64,
}

/// Raw moments E[X^1..4] of Binomial(n, q).
fn binomial_raw_moments(n: f64, q: f64) -> [f64; 4] {
    let mu = n * q;
    let s2 = n * q * (1.0 - q);
    let m3c = s2 * (1.0 - 2.0 * q);
    let m4c = 3.0 * s2 * s2 + s2 * (1.0 - 6.0 * q * (1.0 - q));
    [
        mu,
        s2 + mu * mu,
        m3c + 3.0 * mu * s2 + mu.powi(3),
        m4c + 4.0 * m3c * mu + 6.0 * s2 * mu * mu + mu.powi(4),
    ]
}

/// Exact moments of the group-averaged weights for a correlated/
/// uncorrelated split.
///
/// The average weight of the correlated group equals
/// `(1/(K Nc)) * sum_k Mc(k) * M(k)` where `Mc` counts correlated
/// firings, and symmetrically for the uncorrelated group. Conditioned
/// on the reference bit, `Mc` is binomial and the uncorrelated count
/// `Mu` is an independent binomial, so all required moments are in
/// closed form. Group means of weights share the reference-process
/// realization across devices, which makes this the correct standard
/// error; the naive s/sqrt(n) over devices understates it.
pub fn expected_group_weight_moments(
    n: usize,
    n_correlated: usize,
    p: f64,
    c: f64,
    k_steps: usize,
) -> Result<(GroupWeightMoments, GroupWeightMoments), BaselineError> {
    if n_correlated == 0 || n_correlated >= n {
        return Err(BaselineError::DegenerateGroup);
    }
    let nc = n_correlated as f64;
    let nu = (n - n_correlated) as f64;
    let sqrt_c = c.sqrt();
    let q_active = p + sqrt_c * (1.0 - p);
    let q_idle = p * (1.0 - sqrt_c);

    // Mixture moments of Mc over the reference branches.
    let active = binomial_raw_moments(nc, q_active);
    let idle = binomial_raw_moments(nc, q_idle);
    let mc: Vec<f64> = (0..4).map(|j| p * active[j] + (1.0 - p) * idle[j]).collect();
    let mu = binomial_raw_moments(nu, p);

    let k = k_steps as f64;
    // V = Mc^2 + Mc * Mu, the per-step contribution to the correlated sum.
    let corr = {
        let ev = mc[1] + mc[0] * mu[0];
        let ev2 = mc[3] + 2.0 * mc[2] * mu[0] + mc[1] * mu[1];
        let var = ev2 - ev * ev;
        GroupWeightMoments {
            mean: ev / nc,
            std_of_mean: (var / k).sqrt() / nc,
        }
    };
    // V' = Mu^2 + Mu * Mc for the uncorrelated group.
    let unc = {
        let ev = mu[1] + mu[0] * mc[0];
        let ev2 = mu[3] + 2.0 * mu[2] * mc[0] + mu[1] * mc[1];
        let var = ev2 - ev * ev;
        GroupWeightMoments {
            mean: ev / nu,
            std_of_mean: (var / k).sqrt() / nu,
        }
    };
    Ok((corr, unc))
}

/// Dense uncentered covariance matrix, materialized only for small N.
pub fn covariance_matrix<S: ProcessSource>(
    source: &mut S,
    cap: usize,
) -> Result<Vec<Vec<f64>>, BaselineError> {
    let n = source.n_processes();
    if n > cap {
        return Err(BaselineError::MatrixTooLarge { n, cap });
    }
    let mut acc = vec![vec![0u64; n]; n];
    let mut k = 0usize;
    let mut active: Vec<usize> = Vec::with_capacity(n);
    while let Some(x) = source.next_step() {
        active.clear();
        active.extend(x.ones());
        for &i in &active {
            for &j in &active {
                acc[i][j] += 1;
            }
        }
        k += 1;
    }
    if k == 0 {
        return Err(BaselineError::EmptyStream);
    }
    Ok(acc
        .into_iter()
        .map(|row| row.into_iter().map(|v| v as f64 / k as f64).collect())
        .collect())
}

/// Result of 1-D Lloyd clustering; centroids are in ascending order and
/// labels index into them.
#[derive(Debug, Clone, PartialEq)]
pub struct Kmeans1d {
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Kmeans1d {
    /// Flags for the top cluster, the detector's "correlated" class.
    pub fn correlated_flags(&self) -> Vec<bool> {
        let top = self.centroids.len() - 1;
        self.labels.iter().map(|&l| l == top).collect()
    }
}

/// Lloyd iterations to a fixed point with deterministic initialization:
/// centroids start evenly spaced between the minimum and maximum value,
/// which for k = 2 is exactly the min/max pair.
pub fn kmeans_1d(values: &[f64], k: usize) -> Result<Kmeans1d, BaselineError> {
    assert!(k >= 1, "k must be >= 1");
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(BaselineError::NonFiniteValue { index: i });
        }
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < k {
        return Err(BaselineError::TooFewDistinctValues {
            distinct: distinct.len(),
            k,
        });
    }
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let mut centroids: Vec<f64> = if k == 1 {
        vec![values.iter().sum::<f64>() / values.len() as f64]
    } else {
        (0..k)
            .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
            .collect()
    };
    let mut labels = vec![0usize; values.len()];
    for _ in 0..1000 {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::MAX;
            for (j, &c) in centroids.iter().enumerate() {
                let d = (v - c).abs();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (i, &v) in values.iter().enumerate() {
            sums[labels[i]] += v;
            counts[labels[i]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    Ok(Kmeans1d { centroids, labels })
}

/// Within-cluster sum of squared distances for a labeling.
pub fn within_cluster_variance(values: &[f64], labels: &[usize], centroids: &[f64]) -> f64 {
    values
        .iter()
        .zip(labels)
        .map(|(&v, &l)| (v - centroids[l]) * (v - centroids[l]))
        .sum()
}

/// Compensated (Kahan) summation for float reductions whose result must
/// not depend on evaluation order at the 1e-12 level.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated mean of a slice.
pub fn kahan_mean(values: &[f64]) -> f64 {
    let mut s = KahanSum::default();
    for &v in values {
        s.add(v);
    }
    s.value() / values.len() as f64
}

/// Compensated mean and sample standard deviation (n - 1 denominator).
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let mean = kahan_mean(values);
    let mut s = KahanSum::default();
    for &v in values {
        s.add((v - mean) * (v - mean));
    }
    let var = if values.len() > 1 {
        s.value() / (values.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Brute-force weight computation straight from the definition: build
/// the uncentered covariance matrix in O(N^2 K) and sum its rows. This
/// is the independent oracle for `weights_streaming`; it must never be
/// rewritten in terms of the streaming identity.
pub fn weights_brute_force(steps: &[BitVec], n: usize) -> Vec<f64> {
    let k = steps.len();
    let mut r = vec![vec![0u64; n]; n];
    for x in steps {
        for i in 0..n {
            for j in 0..n {
                if x.get(i) && x.get(j) {
                    r[i][j] += 1;
                }
            }
        }
    }
    (0..n)
        .map(|i| r[i].iter().map(|&v| v as f64 / k as f64).sum())
        .collect()
}
