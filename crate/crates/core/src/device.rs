//! Single-device PCM physics: crystallization dynamics, write pulses,
//! conductance readout, variability and read noise.
//!
//! The internal state of a device is the effective amorphous thickness
//! `u_a` (nm). A RESET pulse re-initializes `u_a` from a truncated
//! normal distribution, which lumps inter- and intra-device variability
//! into one knob. SET pulses crystallize material by integrating
//!
//! ```text
//! du_a/dt = -v_g(T_int),   T_int = R_th(u_a) * P_inp + T_amb
//! ```
//!
//! with a fixed-step explicit scheme. Conductance is an affine map of
//! the crystallized fraction between `g_min` (fresh RESET) and `g_max`
//! (fully crystallized), with optional multiplicative read noise and
//! power-law drift.

use crate::config::Violation;
use crate::rng::RandomStream;
use crate::table::LookupTable;

/// Largest allowed `u_a` change in a single integrator step (nm).
/// Steps that would exceed it are subdivided.
const MAX_STEP_DELTA_NM: f64 = 0.5;

/// Reference time for the drift power law (ns).
pub const DRIFT_T0_NS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Reset,
    Set,
}

/// A write stimulus: RESET re-amorphizes, SET crystallizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub kind: PulseKind,
    pub amplitude_ua: f64,
    pub duration_ns: f64,
}

impl Pulse {
    pub fn set(amplitude_ua: f64, duration_ns: f64) -> Self {
        Self {
            kind: PulseKind::Set,
            amplitude_ua,
            duration_ns,
        }
    }

    pub fn reset(amplitude_ua: f64, duration_ns: f64) -> Self {
        Self {
            kind: PulseKind::Reset,
            amplitude_ua,
            duration_ns,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !self.amplitude_ua.is_finite() || !self.duration_ns.is_finite() {
            return Err(DeviceError::NonFinitePulse);
        }
        if self.amplitude_ua < 0.0 {
            return Err(DeviceError::NegativeAmplitude);
        }
        if self.duration_ns <= 0.0 {
            return Err(DeviceError::NonPositiveDuration);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeviceError {
    ExpectedSetPulse,
    NonFinitePulse,
    NegativeAmplitude,
    NonPositiveDuration,
}

impl std::fmt::Display for DeviceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviceError::ExpectedSetPulse => write!(f, "operation requires a SET pulse"),
            DeviceError::NonFinitePulse => write!(f, "pulse amplitude/duration must be finite"),
            DeviceError::NegativeAmplitude => write!(f, "pulse amplitude must be >= 0"),
            DeviceError::NonPositiveDuration => write!(f, "pulse duration must be > 0"),
        }
    }
}

impl std::error::Error for DeviceError {}

/// Physics constants and lookup tables shared by all devices of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    /// Mean effective amorphous thickness created by RESET (nm).
    pub ua0_mean_nm: f64,
    /// Std of the sampled post-RESET thickness (nm); 0 disables variability.
    pub ua0_sigma_nm: f64,
    /// Growth velocity over interface temperature, K -> nm/ns.
    pub vg_table: LookupTable,
    /// Effective thermal resistance over amorphous thickness, nm -> K/uW.
    pub rth_table: LookupTable,
    /// Ambient temperature (K).
    pub t_amb_k: f64,
    /// Melting temperature (K); growth velocity is zero at or above it.
    pub t_melt_k: f64,
    /// Conductance of a fresh RESET device (uS).
    pub g_min_us: f64,
    /// Conductance of a fully crystallized device (uS).
    pub g_max_us: f64,
    /// Dissipated power per unit SET current (uW/uA).
    pub power_per_current_uw_per_ua: f64,
    /// Relative std of multiplicative read noise; 0 disables it.
    pub read_noise_rel: f64,
    /// Power-law drift exponent; 0 disables drift.
    pub drift_nu: f64,
    /// Fixed integration step (ns).
    pub ode_step_ns: f64,
}

impl Default for DeviceParams {
    /// Defaults shaped to the published anchors: negligible growth up to
    /// about 550 K, maximum growth near 750 K, zero growth at melt, and
    /// a thermal resistance that decreases mildly as the interface moves
    /// away from the bottom electrode. With the default power coupling,
    /// SET currents of 50..100 uA land between growth onset and peak.
    fn default() -> Self {
        Self {
            ua0_mean_nm: 60.0,
            ua0_sigma_nm: 3.0,
            vg_table: LookupTable::new(vec![
                (300.0, 0.0),
                (400.0, 0.0),
                (450.0, 2.0e-5),
                (500.0, 2.0e-4),
                (550.0, 2.0e-3),
                (600.0, 4.0e-3),
                (650.0, 1.2e-2),
                (700.0, 5.0e-2),
                (750.0, 1.5e-1),
                (800.0, 1.0e-1),
                (850.0, 2.0e-2),
                (900.0, 0.0),
            ])
            .expect("default growth table is valid"),
            rth_table: LookupTable::new(vec![
                (0.0, 2.52),
                (30.0, 2.51),
                (60.0, 2.50),
                (90.0, 2.49),
                (120.0, 2.48),
            ])
            .expect("default thermal table is valid"),
            t_amb_k: 300.0,
            t_melt_k: 900.0,
            g_min_us: 0.1,
            g_max_us: 20.0,
            power_per_current_uw_per_ua: 2.0,
            read_noise_rel: 0.05,
            drift_nu: 0.0,
            ode_step_ns: 1.0,
        }
    }
}

impl DeviceParams {
    /// Idealized configuration where the growth velocity is a constant
    /// `rate` regardless of temperature, with variability and noise off.
    /// Used by the linear-accumulation primitives.
    pub fn constant_growth(rate_nm_per_ns: f64) -> Self {
        Self {
            ua0_sigma_nm: 0.0,
            vg_table: LookupTable::constant(rate_nm_per_ns),
            rth_table: LookupTable::constant(1.0),
            read_noise_rel: 0.0,
            ..Self::default()
        }
    }

    pub fn interface_temp_k(&self, ua_nm: f64, power_uw: f64) -> f64 {
        self.rth_table.eval(ua_nm) * power_uw + self.t_amb_k
    }

    /// Growth velocity at an interface temperature; zero at/above melt.
    pub fn growth_velocity_nm_per_ns(&self, t_k: f64) -> f64 {
        if t_k >= self.t_melt_k {
            0.0
        } else {
            self.vg_table.eval(t_k)
        }
    }

    /// Noise-free conductance for a thickness `ua` given the thickness
    /// `ua0` sampled at the last RESET.
    pub fn conductance_us(&self, ua_nm: f64, ua0_nm: f64) -> f64 {
        self.g_min_us + (self.g_max_us - self.g_min_us) * (1.0 - ua_nm / ua0_nm)
    }

    /// Check every parameter invariant; the first violation is reported
    /// with the key path used by the parameter file format.
    pub fn validate(&self) -> Result<(), Violation> {
        let check = |ok: bool, path: &str, message: &str| -> Result<(), Violation> {
            if ok {
                Ok(())
            } else {
                Err(Violation::new(path, message))
            }
        };
        check(
            self.ua0_mean_nm.is_finite() && self.ua0_mean_nm > 0.0,
            "ua0_mean_nm",
            "must be > 0",
        )?;
        check(
            self.ua0_sigma_nm.is_finite() && self.ua0_sigma_nm >= 0.0,
            "ua0_sigma_nm",
            "must be >= 0",
        )?;
        check(
            self.t_amb_k.is_finite() && self.t_amb_k > 0.0,
            "t_amb_k",
            "must be > 0",
        )?;
        check(
            self.t_melt_k.is_finite() && self.t_melt_k > self.t_amb_k,
            "t_melt_k",
            "must exceed t_amb_k",
        )?;
        check(
            self.g_min_us.is_finite() && self.g_min_us >= 0.0,
            "g_min_us",
            "must be >= 0",
        )?;
        check(
            self.g_max_us.is_finite() && self.g_max_us > self.g_min_us,
            "g_max_us",
            "must exceed g_min_us",
        )?;
        check(
            self.power_per_current_uw_per_ua.is_finite() && self.power_per_current_uw_per_ua >= 0.0,
            "power_per_current_uw_per_ua",
            "must be >= 0",
        )?;
        check(
            self.read_noise_rel.is_finite() && self.read_noise_rel >= 0.0,
            "read_noise_rel",
            "must be >= 0",
        )?;
        check(
            self.drift_nu.is_finite() && self.drift_nu >= 0.0,
            "drift_nu",
            "must be >= 0",
        )?;
        check(
            self.ode_step_ns.is_finite() && self.ode_step_ns > 0.0,
            "ode_step_ns",
            "must be > 0",
        )?;
        self.validate_vg_shape()?;
        self.validate_rth()?;
        Ok(())
    }

    /// Shape anchors for the growth curve. A single-knot table is an
    /// explicitly idealized constant-growth configuration and is exempt
    /// from the physical anchors.
    fn validate_vg_shape(&self) -> Result<(), Violation> {
        const PATH: &str = "vg_table_k_nm_per_ns";
        for &(_, y) in self.vg_table.points() {
            if y < 0.0 {
                return Err(Violation::new(PATH, "growth velocity must be >= 0"));
            }
        }
        if self.vg_table.points().len() == 1 {
            return Ok(());
        }
        let max = self.vg_table.max_y();
        if max <= 0.0 {
            return Err(Violation::new(PATH, "growth velocity is zero everywhere"));
        }
        if self.vg_table.eval(300.0) != 0.0 {
            return Err(Violation::new(PATH, "growth must be zero at 300 K"));
        }
        for &(x, y) in self.vg_table.points() {
            if x <= 550.0 && y > 0.02 * max {
                return Err(Violation::new(
                    PATH,
                    "growth must be negligible (<= 2% of peak) at or below 550 K",
                ));
            }
            if x >= self.t_melt_k && y != 0.0 {
                return Err(Violation::new(PATH, "growth must be zero at or above t_melt_k"));
            }
        }
        let peak_x = self
            .vg_table
            .points()
            .iter()
            .fold((0.0f64, f64::MIN), |best, &(x, y)| {
                if y > best.1 {
                    (x, y)
                } else {
                    best
                }
            })
            .0;
        if !(700.0..=800.0).contains(&peak_x) {
            return Err(Violation::new(
                PATH,
                "growth velocity must peak near 750 K (between 700 and 800 K)",
            ));
        }
        Ok(())
    }

    fn validate_rth(&self) -> Result<(), Violation> {
        const PATH: &str = "rth_table_nm_k_per_uw";
        let hi = self.ua0_mean_nm + 4.0 * self.ua0_sigma_nm;
        for &(x, y) in self.rth_table.points() {
            if (0.0..=hi).contains(&x) && y <= 0.0 {
                return Err(Violation::new(PATH, "thermal resistance must be positive"));
            }
        }
        if self.rth_table.eval(0.0) <= 0.0 || self.rth_table.eval(hi) <= 0.0 {
            return Err(Violation::new(PATH, "thermal resistance must be positive"));
        }
        Ok(())
    }
}

/// Per-device internal state.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    /// Effective amorphous thickness (nm).
    pub ua_nm: f64,
    /// Thickness sampled at the last RESET (nm); fixes the conductance map.
    pub ua0_nm: f64,
    pub resets_seen: u64,
    pub pulses_seen: u64,
    /// Events consumed from this device's random stream.
    pub rng_events: u64,
    /// Time since the last write, for drift (ns).
    pub age_ns: f64,
}

impl DeviceState {
    /// Nominal state before any RESET: thickness at the configured mean.
    pub fn fresh(params: &DeviceParams) -> Self {
        Self {
            ua_nm: params.ua0_mean_nm,
            ua0_nm: params.ua0_mean_nm,
            resets_seen: 0,
            pulses_seen: 0,
            rng_events: 0,
            age_ns: 0.0,
        }
    }

    /// Re-amorphize: sample a new thickness from a truncated normal.
    /// RESET is modeled as state re-initialization only.
    pub fn reset(&mut self, params: &DeviceParams, rng: &mut RandomStream) {
        let ua0 = if params.ua0_sigma_nm == 0.0 {
            params.ua0_mean_nm
        } else {
            loop {
                let v = params.ua0_mean_nm + params.ua0_sigma_nm * rng.next_normal();
                if v > 0.0 {
                    break v;
                }
            }
        };
        self.ua_nm = ua0;
        self.ua0_nm = ua0;
        self.resets_seen += 1;
        self.age_ns = 0.0;
    }

    /// Crystallize under a SET pulse by fixed-step integration of the
    /// growth equation, with substepping so no step moves the interface
    /// by more than half a nanometer. The thickness clamps at zero.
    pub fn apply_set(&mut self, pulse: &Pulse, params: &DeviceParams) -> Result<(), DeviceError> {
        if pulse.kind != PulseKind::Set {
            return Err(DeviceError::ExpectedSetPulse);
        }
        pulse.validate()?;
        let power_uw = params.power_per_current_uw_per_ua * pulse.amplitude_ua;
        let mut remaining = pulse.duration_ns;
        while remaining > 0.0 && self.ua_nm > 0.0 {
            let t_int = params.interface_temp_k(self.ua_nm, power_uw);
            let v = params.growth_velocity_nm_per_ns(t_int);
            if v <= 0.0 {
                // No growth at this thickness; the temperature cannot
                // change without the thickness changing, so stop early.
                break;
            }
            let mut dt = params.ode_step_ns.min(remaining);
            if v * dt > MAX_STEP_DELTA_NM {
                dt = MAX_STEP_DELTA_NM / v;
            }
            self.ua_nm = (self.ua_nm - v * dt).max(0.0);
            remaining -= dt;
        }
        self.pulses_seen += 1;
        self.age_ns = 0.0;
        Ok(())
    }

    /// Read the conductance: affine in the crystallized fraction, then
    /// multiplicative read noise, then the drift factor, clamped at zero.
    pub fn read_conductance(&self, params: &DeviceParams, rng: &mut RandomStream) -> f64 {
        let mut g = params.conductance_us(self.ua_nm, self.ua0_nm);
        if params.read_noise_rel > 0.0 {
            g *= 1.0 + params.read_noise_rel * rng.next_normal();
        }
        if params.drift_nu > 0.0 {
            g *= ((self.age_ns + DRIFT_T0_NS) / DRIFT_T0_NS).powf(-params.drift_nu);
        }
        g.max(0.0)
    }

    pub fn advance_age(&mut self, dt_ns: f64) {
        self.age_ns += dt_ns;
    }
}
