//! Array-scale simulation of computational phase-change memory.
//!
//! The crate models the crystallization dynamics of individual PCM
//! devices, arrays of such devices with deterministic keyed randomness,
//! and the event-stream machinery built on top of them:
//!
//! * [`device`]: single-device physics (growth dynamics, RESET/SET
//!   response, conductance mapping, variability, read noise, drift).
//! * [`array`]: bulk pulse application and readout over many devices.
//! * [`ensemble`]: correlated binary stochastic process generation and
//!   replayable recorded sources.
//! * [`engine`]: the momentum-scheduled correlation detector.
//! * [`baselines`]: exact covariance weights, closed-form expectations,
//!   and 1-D k-means used as oracles and comparison detectors.
//! * [`apps`]: factor checking and approximate matrix-vector products
//!   built on accumulation.
//! * [`weather`] / [`image`]: input adapters for precipitation records
//!   and bitmap-defined correlated subsets.
//! * [`config`] / [`export`]: parameter files, validation, artifacts.

pub mod apps;
pub mod array;
pub mod baselines;
pub mod bits;
pub mod config;
pub mod device;
pub mod engine;
pub mod ensemble;
pub mod export;
pub mod image;
pub mod rng;
pub mod table;
pub mod weather;

pub use array::{ArrayConfig, ArraySim};
pub use bits::BitVec;
pub use device::{DeviceParams, DeviceState, Pulse, PulseKind};
pub use engine::{EngineConfig, Modulation, RunResult};
pub use ensemble::{EnsembleConfig, ProcessEnsemble, ProcessSource, TableSource};
pub use rng::RandomStream;
pub use table::LookupTable;
