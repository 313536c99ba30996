//! Fixed-size collections of simulated devices with bulk operations.
//!
//! Devices are independent value-like states, so bulk pulse application
//! and readout fan out across a worker pool. Randomness is keyed by
//! (master seed, device id, per-device event counter), which makes the
//! result of any partition or ordering of the work bit-identical to a
//! sequential run.

use rayon::prelude::*;

use crate::config::Violation;
use crate::device::{DeviceError, DeviceParams, DeviceState, Pulse, PulseKind};
use crate::rng::RandomStream;

#[derive(Debug, Clone)]
pub struct ArrayConfig {
    pub n_devices: usize,
    pub params: DeviceParams,
    pub master_seed: u64,
}

#[derive(Debug)]
pub enum ArrayError {
    EmptyArray,
    InvalidParams(Violation),
    DeviceIdOutOfRange { id: usize, n_devices: usize },
    ExpectedSetPulse,
    Device(DeviceError),
}

impl std::fmt::Display for ArrayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArrayError::EmptyArray => write!(f, "array needs at least one device"),
            ArrayError::InvalidParams(v) => write!(f, "invalid device parameters: {v}"),
            ArrayError::DeviceIdOutOfRange { id, n_devices } => {
                write!(f, "device id {id} out of range (array has {n_devices})")
            }
            ArrayError::ExpectedSetPulse => write!(f, "bulk pulse application requires a SET pulse"),
            ArrayError::Device(e) => write!(f, "device error: {e}"),
        }
    }
}

impl std::error::Error for ArrayError {}

impl From<DeviceError> for ArrayError {
    fn from(e: DeviceError) -> Self {
        ArrayError::Device(e)
    }
}

/// A simulated array of PCM devices.
#[derive(Debug, Clone)]
pub struct ArraySim {
    params: DeviceParams,
    master_seed: u64,
    states: Vec<DeviceState>,
}

impl ArraySim {
    pub fn new(config: ArrayConfig) -> Result<Self, ArrayError> {
        if config.n_devices == 0 {
            return Err(ArrayError::EmptyArray);
        }
        config.params.validate().map_err(ArrayError::InvalidParams)?;
        let fresh = DeviceState::fresh(&config.params);
        Ok(Self {
            params: config.params,
            master_seed: config.master_seed,
            states: vec![fresh; config.n_devices],
        })
    }

    pub fn n_devices(&self) -> usize {
        self.states.len()
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn state(&self, id: usize) -> &DeviceState {
        &self.states[id]
    }

    pub fn states(&self) -> &[DeviceState] {
        &self.states
    }

    /// Re-initialize every device through its own keyed stream.
    pub fn reset_all(&mut self) {
        let params = &self.params;
        let seed = self.master_seed;
        self.states.par_iter_mut().enumerate().for_each(|(id, st)| {
            let mut rng = RandomStream::for_event(seed, id as u64, st.rng_events);
            st.rng_events += 1;
            st.reset(params, &mut rng);
        });
    }

    /// Apply one SET pulse to the selected devices and no others.
    ///
    /// Ids are validated before any device is touched; duplicates are
    /// allowed and behave as set membership (one pulse per device).
    pub fn pulse_subset(&mut self, selected: &[usize], pulse: &Pulse) -> Result<(), ArrayError> {
        if pulse.kind != PulseKind::Set {
            return Err(ArrayError::ExpectedSetPulse);
        }
        pulse.validate()?;
        let n = self.states.len();
        for &id in selected {
            if id >= n {
                return Err(ArrayError::DeviceIdOutOfRange { id, n_devices: n });
            }
        }
        let mut mask = vec![false; n];
        for &id in selected {
            mask[id] = true;
        }
        let params = &self.params;
        self.states
            .par_iter_mut()
            .zip(mask.par_iter())
            .for_each(|(st, &hit)| {
                if hit {
                    st.apply_set(pulse, params).expect("pulse validated above");
                }
            });
        Ok(())
    }

    /// Read every device; read noise consumes one event per device.
    pub fn read_all(&mut self) -> Vec<f64> {
        let params = &self.params;
        let seed = self.master_seed;
        self.states
            .par_iter_mut()
            .enumerate()
            .map(|(id, st)| {
                let mut rng = RandomStream::for_event(seed, id as u64, st.rng_events);
                st.rng_events += 1;
                st.read_conductance(params, &mut rng)
            })
            .collect()
    }

    /// Advance the drift clock of every device.
    pub fn advance_time(&mut self, dt_ns: f64) {
        self.states.par_iter_mut().for_each(|st| st.advance_age(dt_ns));
    }

    pub fn ua_values(&self) -> Vec<f64> {
        self.states.iter().map(|st| st.ua_nm).collect()
    }
}
