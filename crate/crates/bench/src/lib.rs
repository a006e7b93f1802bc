//! Fixtures shared by the benchmarks.

use firkit_core::{
    simulate_trajectory, DMatrix, DVector, MeasurementWindow, ModelSequence, SimConfig,
    StateEstimate,
};

/// Constant-velocity target with unit sampling interval and white
/// acceleration noise (positive-definite `Q`).
pub fn cv_model() -> ModelSequence {
    let f = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let q = DMatrix::from_row_slice(2, 2, &[0.01 / 3.0, 0.005, 0.005, 0.01]);
    let r = DMatrix::from_element(1, 1, 1.0);
    ModelSequence::constant(f, h, q, r).expect("valid model")
}

/// Measurements `y_1..y_steps` of one simulated run.
pub fn stream(model: &ModelSequence, steps: usize, seed: u64) -> MeasurementWindow {
    let sim = simulate_config(model, steps, seed, 1);
    simulate_trajectory(model, &sim, 0)
        .expect("simulation")
        .measurements
}

pub fn simulate_config(model: &ModelSequence, steps: usize, seed: u64, runs: usize) -> SimConfig {
    SimConfig::new(seed, steps, DVector::zeros(model.state_dim()), runs)
}

/// `(0, I)` prior at index 0.
pub fn unit_prior(model: &ModelSequence) -> StateEstimate {
    let n = model.state_dim();
    StateEstimate {
        index: 0,
        x_hat: DVector::zeros(n),
        p: DMatrix::identity(n, n),
    }
}
