//! Simulator for a structured population of metastases coupled through a
//! circulating angiogenesis inhibitor.
//!
//! Tumors are described by their volume `V` and carrying capacity `K`. All
//! tumors share a Gompertz-type growth law whose capacity is stimulated
//! locally and inhibited both locally and by the total inhibitor amount `I`,
//! which every tumor produces in proportion to its volume. Tumors above a
//! threshold volume emit new metastases, all born at `(V0, K0)`; tumors whose
//! volume falls below `V0` leave the population.
//!
//! The crate is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`). The `*64` aliases below fix it to `f64`.

pub mod engine;
pub mod error;
pub mod model;
pub mod observables;
pub mod scalar;
pub mod spectral;

pub use engine::{
    birth_rate, inhibitor_rate, simulate, step, total_burden, Cohort, Simulation, Simulator,
    SolverSettings, Stepper, SystemState,
};
pub use error::{Error, Result};
pub use model::{
    birth_state, emission_rate, growth_field, local_inhibition_coefficient, nondimensionalize,
    redimensionalize, Biophysical, DimensionalParams, ModelParams, TumorState,
};
pub use observables::{
    histogram, oscillation_metrics, sample, series_oscillation_metrics, Observation,
    OscillationMetrics, Trajectory, VolumeHistogram,
};
pub use scalar::Scalar;
pub use spectral::{
    characteristic_flow, fit_growth_rate, malthus_exponent, malthus_exponent_with,
    CharacteristicFlow, SpectralOptions, SpectralResult,
};

pub type ModelParams64 = ModelParams<f64>;
pub type DimensionalParams64 = DimensionalParams<f64>;
pub type TumorState64 = TumorState<f64>;
pub type Cohort64 = Cohort<f64>;
pub type SystemState64 = SystemState<f64>;
pub type SolverSettings64 = SolverSettings<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type VolumeHistogram64 = VolumeHistogram<f64>;
pub type OscillationMetrics64 = OscillationMetrics<f64>;
pub type SpectralResult64 = SpectralResult<f64>;
pub type Simulation64 = Simulation<f64>;
