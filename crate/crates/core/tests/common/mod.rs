//! Random-model helpers shared by the integration test targets.
#![allow(dead_code)]

use firkit_core::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn gauss(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Box-Muller keeps the test generator independent of the simulator's.
    DMatrix::from_fn(rows, cols, |_, _| {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = gauss(rng, n, n);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Orthogonal factor times a diagonal with entries in `[1 − spread, 1 + spread]`.
pub fn random_transition(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DMatrix<f64> {
    let q = gauss(rng, n, n).qr().q();
    let d = DVector::from_fn(n, |_, _| 1.0 + spread * (2.0 * rng.random::<f64>() - 1.0));
    q * DMatrix::from_diagonal(&d)
}

pub fn simulate(model: &ModelSequence, steps: usize, seed: u64) -> Trajectory {
    let x0 = DVector::from_element(model.state_dim(), 1.0);
    simulate_trajectory(model, &SimConfig::new(seed, steps, x0, 1), 0).unwrap()
}
