//! Covariance-form Kalman filter and the predictor/corrector information filter.
//!
//! The information filter propagates `(ẑ, Z) = (P⁻¹x̂, P⁻¹)`. Its prediction
//! is evaluated in a form that stays defined at `Z = 0`, which is how a
//! receding-horizon window starts:
//!
//! * `Q` positive definite: with `M = Z + FᵀQ⁻¹F`,
//!   `Z⁻ = Q⁻¹ − Q⁻¹F M⁻¹ FᵀQ⁻¹` and `ẑ⁻ = Q⁻¹F M⁻¹ ẑ`.
//! * `Q = 0`: `Z⁻ = F⁻ᵀ Z F⁻¹` and `ẑ⁻ = F⁻ᵀ ẑ`.
//! * `Q` singular but nonzero: only possible from a positive definite `Z`,
//!   through the covariance form `(F Z⁻¹ Fᵀ + Q)⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, spd_factor, symmetrize};
use crate::model::{
    InfoEstimate, MeasurementWindow, ModelSequence, ProcessNoise, StateEstimate, Step,
    StepDiagnostics,
};

fn check_index(expected: Step, got: Step, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "{what} has index {got}, expected {expected}"
        )));
    }
    Ok(())
}

fn check_measurement(model: &ModelSequence, y: &DVector<f64>) -> Result<()> {
    if y.len() != model.measurement_dim() {
        return Err(Error::Model(format!(
            "measurement has length {}, expected {}",
            y.len(),
            model.measurement_dim()
        )));
    }
    Ok(())
}

fn check_state(model: &ModelSequence, x: &DVector<f64>, m: &DMatrix<f64>) -> Result<()> {
    let n = model.state_dim();
    if x.len() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Model(format!(
            "estimate dimensions do not match state dimension {n}"
        )));
    }
    Ok(())
}

/// Time update `x̂_{k|k−1} = F_k x̂_{k−1}`, `P_{k|k−1} = F_k P_{k−1} F_kᵀ + Q_{k−1}`.
pub fn kf_predict(model: &ModelSequence, k: Step, prior: &StateEstimate) -> Result<StateEstimate> {
    check_index(k - 1, prior.index, "prior")?;
    check_state(model, &prior.x_hat, &prior.p)?;
    let f = model.transition(k);
    let mut p = f * &prior.p * f.transpose() + model.process_noise(k - 1);
    symmetrize(&mut p);
    Ok(StateEstimate {
        index: k,
        x_hat: f * &prior.x_hat,
        p,
    })
}

/// Measurement update with the pre-fit gain `K = P⁻Hᵀ(HP⁻Hᵀ + R)⁻¹`.
pub fn kf_update(
    model: &ModelSequence,
    k: Step,
    predicted: &StateEstimate,
    y: &DVector<f64>,
) -> Result<(StateEstimate, StepDiagnostics)> {
    check_index(k, predicted.index, "predicted estimate")?;
    check_state(model, &predicted.x_hat, &predicted.p)?;
    check_measurement(model, y)?;
    let h = model.observation(k);
    let hp = h * &predicted.p;
    let s = &hp * h.transpose() + model.measurement_noise(k);
    let chol = spd_factor(&s).ok_or(Error::Singular {
        step: k,
        what: "innovation covariance",
    })?;
    // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ since P and S are symmetric.
    let gain = chol.solve(&hp).transpose();
    let innovation = y - h * &predicted.x_hat;
    let x_hat = &predicted.x_hat + &gain * &innovation;
    let mut p = &predicted.p - &gain * hp;
    symmetrize(&mut p);
    Ok((
        StateEstimate { index: k, x_hat, p },
        StepDiagnostics {
            index: k,
            gain,
            innovation,
        },
    ))
}

/// Posterior form of the gain, `P_k Hᵀ R⁻¹`, equal to the pre-fit gain.
pub fn kf_gain_posterior_form(
    posterior: &StateEstimate,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let chol = spd_factor(r).ok_or(Error::Singular {
        step: posterior.index,
        what: "measurement noise R",
    })?;
    Ok(chol.solve(&(h * &posterior.p)).transpose())
}

/// Buffers reused across in-place information-filter steps.
pub(crate) struct InfoScratch {
    ft: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    factor: DMatrix<f64>,
    w: DMatrix<f64>,
    v: DVector<f64>,
}

impl InfoScratch {
    pub(crate) fn new(n: usize, m: usize) -> Self {
        InfoScratch {
            ft: DMatrix::zeros(n, n),
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, n),
            factor: DMatrix::zeros(n, n),
            w: DMatrix::zeros(m, n),
            v: DVector::zeros(n),
        }
    }

    pub(crate) fn for_model(model: &ModelSequence) -> Self {
        Self::new(model.state_dim(), model.measurement_dim())
    }
}

/// Information-form time update, well defined at `Z = 0`.
pub fn if_predict(model: &ModelSequence, k: Step, prior: &InfoEstimate) -> Result<InfoEstimate> {
    let mut est = prior.clone();
    if_predict_in_place(model, k, &mut est, &mut InfoScratch::for_model(model))?;
    Ok(est)
}

/// [`if_predict`] overwriting `est`, which must be indexed `k − 1`.
pub(crate) fn if_predict_in_place(
    model: &ModelSequence,
    k: Step,
    est: &mut InfoEstimate,
    ws: &mut InfoScratch,
) -> Result<()> {
    check_index(k - 1, est.index, "prior")?;
    check_state(model, &est.z_hat, &est.z)?;
    let f = model.transition(k);

    match model.process_noise_structure(k - 1) {
        ProcessNoise::Zero => {
            let f_inv = linalg::checked_inverse(f).ok_or(Error::Singular {
                step: k,
                what: "transition F with zero process noise",
            })?;
            let f_inv_t = f_inv.transpose();
            let mut z = &f_inv_t * &est.z * &f_inv;
            symmetrize(&mut z);
            est.z_hat = f_inv_t * &est.z_hat;
            est.z = z;
        }
        ProcessNoise::Definite { inverse: q_inv } => {
            // A = Q⁻¹F, M = Z + FᵀA.
            ws.a.gemm(1.0, q_inv, f, 0.0);
            ws.b.copy_from(&est.z);
            ws.b.gemm_tr(1.0, f, &ws.a, 1.0);
            let m_chol = linalg::spd_factor_into(&mut ws.factor, &ws.b).ok_or(Error::Singular {
                step: k,
                what: "Z + FᵀQ⁻¹F",
            })?;
            // Zero information stays exactly zero.
            if !(linalg::is_zero(&est.z) && est.z_hat.iter().all(|&v| v == 0.0)) {
                ws.a.transpose_to(&mut ws.ft);
                m_chol.solve_mut(&mut ws.ft);
                est.z.copy_from(q_inv);
                est.z.gemm(-1.0, &ws.a, &ws.ft, 1.0);
                symmetrize(&mut est.z);
                ws.v.copy_from(&est.z_hat);
                m_chol.solve_mut(&mut ws.v);
                est.z_hat.gemv(1.0, &ws.a, &ws.v, 0.0);
            }
            ws.factor = m_chol.unpack();
        }
        ProcessNoise::Singular => {
            let z_chol = linalg::spd_factor_into(&mut ws.factor, &est.z).ok_or_else(|| {
                Error::Unsupported {
                    step: k,
                    detail: "singular nonzero process noise with singular information matrix"
                        .into(),
                }
            })?;
            // x̂ = Z⁻¹ẑ and P = Z⁻¹.
            ws.v.copy_from(&est.z_hat);
            z_chol.solve_mut(&mut ws.v);
            ws.a.fill_with_identity();
            z_chol.solve_mut(&mut ws.a);
            ws.factor = z_chol.unpack();
            // F P Fᵀ + Q.
            f.transpose_to(&mut ws.ft);
            ws.b.gemm(1.0, &ws.a, &ws.ft, 0.0);
            ws.a.gemm(1.0, f, &ws.b, 0.0);
            ws.a += model.process_noise(k - 1);
            symmetrize(&mut ws.a);
            let p_chol = linalg::spd_factor_into(&mut ws.factor, &ws.a).ok_or(Error::Singular {
                step: k,
                what: "predicted covariance F Z⁻¹ Fᵀ + Q",
            })?;
            est.z_hat.gemv(1.0, f, &ws.v, 0.0);
            p_chol.solve_mut(&mut est.z_hat);
            est.z.fill_with_identity();
            p_chol.solve_mut(&mut est.z);
            symmetrize(&mut est.z);
            ws.factor = p_chol.unpack();
        }
    }
    est.index = k;
    Ok(())
}

/// Information-form measurement update: `ẑ += HᵀR⁻¹y`, `Z += HᵀR⁻¹H`.
pub fn if_update(
    model: &ModelSequence,
    k: Step,
    predicted: &InfoEstimate,
    y: &DVector<f64>,
) -> Result<InfoEstimate> {
    let mut est = predicted.clone();
    if_update_in_place(model, k, &mut est, y, &mut InfoScratch::for_model(model))?;
    Ok(est)
}

/// [`if_update`] overwriting `est`, which must be indexed `k`.
pub(crate) fn if_update_in_place(
    model: &ModelSequence,
    k: Step,
    est: &mut InfoEstimate,
    y: &DVector<f64>,
    ws: &mut InfoScratch,
) -> Result<()> {
    check_index(k, est.index, "predicted estimate")?;
    check_state(model, &est.z_hat, &est.z)?;
    check_measurement(model, y)?;
    let h = model.observation(k);
    let r_inv = model.measurement_noise_inverse(k).ok_or(Error::Singular {
        step: k,
        what: "measurement noise R",
    })?;
    ws.w.gemm(1.0, r_inv, h, 0.0);
    est.z.gemm_tr(1.0, h, &ws.w, 1.0);
    symmetrize(&mut est.z);
    est.z_hat.gemv_tr(1.0, &ws.w, y, 1.0);
    Ok(())
}

/// Predict then update, in place.
pub(crate) fn if_step_in_place(
    model: &ModelSequence,
    k: Step,
    est: &mut InfoEstimate,
    y: &DVector<f64>,
    ws: &mut InfoScratch,
) -> Result<()> {
    if_predict_in_place(model, k, est, ws)?;
    if_update_in_place(model, k, est, y, ws)
}

/// `P = Z⁻¹`, `x̂ = Z⁻¹ẑ`. Fails while `Z` is not yet positive definite.
pub fn info_to_state(e: &InfoEstimate) -> Result<StateEstimate> {
    let lo = linalg::min_eigenvalue(&e.z);
    if lo.is_nan() || lo <= e.z.trace() * 1e-12 {
        return Err(Error::NotObservable {
            step: e.index,
            detail: format!(
                "information matrix is not positive definite (smallest eigenvalue {lo:e})"
            ),
        });
    }
    let chol = spd_factor(&e.z).ok_or_else(|| Error::NotObservable {
        step: e.index,
        detail: "information matrix is numerically singular".into(),
    })?;
    let x_hat = chol.solve(&e.z_hat);
    Ok(StateEstimate {
        index: e.index,
        x_hat,
        p: linalg::symmetrized(chol.inverse()),
    })
}

/// `Z = P⁻¹`, `ẑ = P⁻¹x̂`.
pub fn state_to_info(e: &StateEstimate) -> Result<InfoEstimate> {
    let chol = spd_factor(&e.p).ok_or(Error::Singular {
        step: e.index,
        what: "covariance P",
    })?;
    let z_hat = chol.solve(&e.x_hat);
    Ok(InfoEstimate {
        index: e.index,
        z_hat,
        z: linalg::symmetrized(chol.inverse()),
    })
}

/// One predict/update cycle per measurement.
pub fn kf_run(
    model: &ModelSequence,
    init: &StateEstimate,
    measurements: &MeasurementWindow,
) -> Result<Vec<(StateEstimate, StepDiagnostics)>> {
    if measurements.is_empty() {
        return Ok(Vec::new());
    }
    check_index(measurements.start - 1, init.index, "initial estimate")?;
    let mut out = Vec::with_capacity(measurements.len());
    let mut current = init.clone();
    for (k, y) in measurements.iter() {
        let predicted = kf_predict(model, k, &current)?;
        let (updated, diag) = kf_update(model, k, &predicted, y)?;
        current = updated.clone();
        out.push((updated, diag));
    }
    Ok(out)
}

/// Information-filter counterpart of [`kf_run`].
pub fn if_run(
    model: &ModelSequence,
    init: &InfoEstimate,
    measurements: &MeasurementWindow,
) -> Result<Vec<InfoEstimate>> {
    if measurements.is_empty() {
        return Ok(Vec::new());
    }
    check_index(measurements.start - 1, init.index, "initial estimate")?;
    let mut out: Vec<InfoEstimate> = Vec::with_capacity(measurements.len());
    let mut current = init.clone();
    let mut ws = InfoScratch::for_model(model);
    for (k, y) in measurements.iter() {
        if_step_in_place(model, k, &mut current, y, &mut ws)?;
        out.push(current.clone());
    }
    Ok(out)
}
