//! Kalman, receding-horizon Kalman FIR (RHKF) and unbiased FIR (UFIR) state
//! estimators for discrete time-variant linear models, with a seeded
//! simulator and Monte-Carlo horizon sweeps.
//!
//! * [`model`]: the state-space model, estimate types and stacked matrices.
//! * [`kalman`]: covariance-form Kalman filter and information filter.
//! * [`rhkf`]: information filter rerun over every sliding window.
//! * [`ufir`]: noise-statistics-free FIR filter and its batch reference.
//! * [`simkit`]: trajectory simulation and model mismatch.
//! * [`horizon`]: MSE versus horizon length, `N_opt` selection, comparisons.

pub mod error;
pub mod horizon;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod rhkf;
pub mod simkit;
pub mod ufir;

pub use error::{Error, Result};
pub use horizon::{
    compare_filters, minimal_adequate_horizon, minimal_horizon_for_rhkf, mse_sweep,
    select_optimal_horizon, CompareEntry, CompareResult, FilterSpec, SweepResult,
};
pub use kalman::{
    if_predict, if_run, if_update, info_to_state, kf_gain_posterior_form, kf_predict, kf_run,
    kf_update, state_to_info,
};
pub use model::{
    stacked_observation, transition_product, window_observable, InfoEstimate, MeasurementWindow,
    ModelFile, ModelMatrices, ModelOverride, ModelSequence, NoiseCheck, StateEstimate, Step,
    StepDiagnostics, UfirEstimate,
};
pub use rhkf::{rhkf_run, rhkf_window_estimate, rhkf_window_from_prior, InitStrategy, RhkfConfig};
pub use simkit::{
    apply_mismatch, simulate_trajectory, FPerturbation, MismatchSpec, SimConfig, Trajectory,
};
pub use ufir::{
    ufir_batch_init, ufir_batch_oracle, ufir_iterate_step, ufir_run, ufir_window_estimate,
    UfirConfig,
};

pub use nalgebra::{DMatrix, DVector};
