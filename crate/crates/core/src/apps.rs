//! Accumulation-based computational primitives: factor checking and
//! approximate matrix-vector multiplication.
//!
//! Both primitives run devices in a constant-growth configuration where
//! each pulse removes an amount of amorphous thickness proportional to
//! its duration, so pulse counts and durations add linearly and the
//! conductance change encodes a sum.

use rayon::prelude::*;

use crate::config::Violation;
use crate::device::{DeviceParams, DeviceState, Pulse};
use crate::rng::RandomStream;

#[derive(Debug)]
pub enum AppError {
    BadConfig(Violation),
    CalibrationFailed {
        candidate: u64,
        crossed_at: Option<u64>,
    },
    NegativeEntry {
        row: usize,
        col: usize,
    },
    NonFiniteEntry {
        row: usize,
        col: usize,
    },
    DimensionMismatch {
        rows: usize,
        cols: usize,
        vector: usize,
    },
    ScaleOverflow {
        row: usize,
    },
    NoGrowth,
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::BadConfig(v) => write!(f, "bad probe config: {v}"),
            AppError::CalibrationFailed {
                candidate,
                crossed_at,
            } => match crossed_at {
                Some(n) => write!(
                    f,
                    "calibration for factor {candidate} crossed the threshold at pulse {n}"
                ),
                None => write!(
                    f,
                    "calibration for factor {candidate} never crossed the threshold"
                ),
            },
            AppError::NegativeEntry { row, col } => {
                write!(f, "negative entry at ({row}, {col}); inputs must be non-negative")
            }
            AppError::NonFiniteEntry { row, col } => {
                write!(f, "non-finite entry at ({row}, {col})")
            }
            AppError::DimensionMismatch { rows, cols, vector } => write!(
                f,
                "matrix is {rows} x {cols} but the vector has {vector} entries"
            ),
            AppError::ScaleOverflow { row } => write!(
                f,
                "pulse scale saturates device for row {row}; reduce the scale"
            ),
            AppError::NoGrowth => write!(f, "device configuration produces no growth"),
        }
    }
}

impl std::error::Error for AppError {}

/// Growth velocity of a device at its fresh thickness under a given
/// SET amplitude. The probe primitives require it to be positive.
fn probe_growth(params: &DeviceParams, amplitude_ua: f64) -> Result<f64, AppError> {
    let power = params.power_per_current_uw_per_ua * amplitude_ua;
    let t = params.interface_temp_k(params.ua0_mean_nm, power);
    let v = params.growth_velocity_nm_per_ns(t);
    if v <= 0.0 {
        return Err(AppError::NoGrowth);
    }
    Ok(v)
}

/// A calibrated divisibility probe: `pulse` is sized so that exactly
/// `candidate` pulses from a fresh initialization cross `threshold_us`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorProbeConfig {
    pub candidate: u64,
    pub threshold_us: f64,
    pub pulse: Pulse,
}

/// Calibrate a probe for candidate factor `x`.
///
/// In constant-growth mode a crossing needs
/// `n * v * dt >= threshold_fraction * ua0`, so picking
/// `dt = threshold_fraction * ua0 / ((x - 1/2) * v)` lands the first
/// crossing exactly on pulse `x`, with half a pulse of margin on either
/// side against rounding. The calibration property is then verified by
/// simulation; a configuration whose growth varies with thickness fails
/// here instead of producing wrong divisibility answers later.
pub fn calibrate_factor_probe(
    candidate: u64,
    threshold_us: f64,
    amplitude_ua: f64,
    params: &DeviceParams,
) -> Result<FactorProbeConfig, AppError> {
    if candidate == 0 {
        return Err(AppError::BadConfig(Violation::new(
            "candidate",
            "must be >= 1",
        )));
    }
    if !(threshold_us > params.g_min_us && threshold_us <= params.g_max_us) {
        return Err(AppError::BadConfig(Violation::new(
            "threshold_us",
            "must lie in (g_min_us, g_max_us]",
        )));
    }
    let v = probe_growth(params, amplitude_ua)?;
    let fraction =
        (threshold_us - params.g_min_us) / (params.g_max_us - params.g_min_us);
    let duration = fraction * params.ua0_mean_nm / ((candidate as f64 - 0.5) * v);
    let pulse = Pulse::set(amplitude_ua, duration);

    // Verify: the threshold must first be crossed at exactly pulse x.
    let mut st = DeviceState::fresh(params);
    for n in 1..=candidate {
        st.apply_set(&pulse, params)
            .map_err(|_| AppError::NoGrowth)?;
        let g = params.conductance_us(st.ua_nm, st.ua0_nm);
        let crossed = g >= threshold_us;
        if crossed != (n == candidate) {
            return Err(AppError::CalibrationFailed {
                candidate,
                crossed_at: if crossed { Some(n) } else { None },
            });
        }
    }
    Ok(FactorProbeConfig {
        candidate,
        threshold_us,
        pulse,
    })
}

/// Apply `trials` pulses, re-initializing on every threshold crossing
/// except after the final pulse; the candidate divides `trials` exactly
/// when the final conductance is at or above the threshold.
pub fn is_factor(cfg: &FactorProbeConfig, trials: u64, params: &DeviceParams) -> Result<bool, AppError> {
    if trials == 0 {
        return Err(AppError::BadConfig(Violation::new("trials", "must be >= 1")));
    }
    let mut st = DeviceState::fresh(params);
    let mut above = false;
    for n in 1..=trials {
        st.apply_set(&cfg.pulse, params)
            .map_err(|_| AppError::NoGrowth)?;
        above = params.conductance_us(st.ua_nm, st.ua0_nm) >= cfg.threshold_us;
        if above && n < trials {
            st = DeviceState::fresh(params);
        }
    }
    Ok(above)
}

/// Dense non-negative matrix for the matrix-vector primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AppError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(AppError::DimensionMismatch {
                    rows: n_rows,
                    cols: n_cols,
                    vector: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(AppError::NonFiniteEntry { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(AppError::NegativeEntry { row: i, col: j });
                }
                data.push(v);
            }
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Exact product, the oracle the device estimate is judged against.
    pub fn multiply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MatvecOptions {
    /// Fixed SET amplitude for every encoding pulse (uA).
    pub amplitude_ua: f64,
    /// Reads averaged per device to beat read noise down.
    pub reads_per_device: usize,
    /// Seed for the read-noise streams.
    pub master_seed: u64,
    /// Pulse duration per unit of `A_ij * x_j` (ns); `None` picks the
    /// largest scale that keeps every row inside the growth window.
    pub scale_ns: Option<f64>,
}

impl Default for MatvecOptions {
    fn default() -> Self {
        Self {
            amplitude_ua: 50.0,
            reads_per_device: 16,
            master_seed: 0,
            scale_ns: None,
        }
    }
}

/// Estimate `A * x` with one device per output row.
///
/// Each device receives, for every column `j`, a pulse whose duration
/// is proportional to `A_ij * x_j`; the total thickness change then
/// encodes the row dot product and is read back from the conductance.
/// N devices and N time-multiplexed pulse rounds replace the N^2
/// devices a resistive crossbar would need.
pub fn matvec_estimate(
    a: &DenseMatrix,
    x: &[f64],
    params: &DeviceParams,
    opts: &MatvecOptions,
) -> Result<Vec<f64>, AppError> {
    if x.len() != a.cols() {
        return Err(AppError::DimensionMismatch {
            rows: a.rows(),
            cols: a.cols(),
            vector: x.len(),
        });
    }
    for (j, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(AppError::NonFiniteEntry { row: 0, col: j });
        }
        if v < 0.0 {
            return Err(AppError::NegativeEntry { row: 0, col: j });
        }
    }
    let v_growth = probe_growth(params, opts.amplitude_ua)?;

    // Upper bound on any row dot product from row sums alone; the sums
    // themselves are what the devices are about to compute.
    let x_max = x.iter().cloned().fold(0.0f64, f64::max);
    let row_sum_max = (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a.get(i, j)).sum::<f64>())
        .fold(0.0f64, f64::max);
    let bound = x_max * row_sum_max;
    if bound == 0.0 {
        return Ok(vec![0.0; a.rows()]);
    }
    let scale_ns = match opts.scale_ns {
        Some(s) => s,
        None => 0.8 * params.ua0_mean_nm / (v_growth * bound),
    };

    let g_span = params.g_max_us - params.g_min_us;
    let estimates: Vec<Result<f64, AppError>> = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            let mut st = DeviceState::fresh(params);
            for j in 0..a.cols() {
                let weight = a.get(i, j) * x[j];
                if weight == 0.0 {
                    continue;
                }
                let pulse = Pulse::set(opts.amplitude_ua, scale_ns * weight);
                st.apply_set(&pulse, params).map_err(|_| AppError::NoGrowth)?;
                if st.ua_nm <= 0.0 {
                    // The clamp engaged: the encoding left the window.
                    return Err(AppError::ScaleOverflow { row: i });
                }
            }
            let g = if params.read_noise_rel > 0.0 {
                let mut sum = 0.0;
                for r in 0..opts.reads_per_device.max(1) {
                    let mut rng =
                        RandomStream::for_event(opts.master_seed, i as u64, r as u64);
                    sum += st.read_conductance(params, &mut rng);
                }
                sum / opts.reads_per_device.max(1) as f64
            } else {
                params.conductance_us(st.ua_nm, st.ua0_nm)
            };
            let delta_ua = (g - params.g_min_us) * params.ua0_mean_nm / g_span;
            Ok(delta_ua / (v_growth * scale_ns))
        })
        .collect();
    estimates.into_iter().collect()
}

/// Relative L2 error of an estimate against the exact product.
pub fn relative_l2_error(estimate: &[f64], exact: &[f64]) -> f64 {
    let num: f64 = estimate
        .iter()
        .zip(exact)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    let den: f64 = exact.iter().map(|t| t * t).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
