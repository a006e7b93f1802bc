//! Unbiased FIR filter.
//!
//! Each window is started by an unweighted least-squares fit over its first
//! `J` measurements and then refined with a Kalman-like predictor/corrector
//! in which `G` stands in for `P`. Only `F_k` and `H_k` are ever read: the
//! filter is blind to `Q`, `R` and any prior.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, spd_factor_into, symmetrize};
use crate::model::{
    default_init_length, stacked_observation, transition_product, window_observable_with_tol,
    MeasurementWindow, ModelSequence, Step, StepDiagnostics, UfirEstimate, WindowView,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UfirConfig {
    pub horizon: usize,
    /// Length of the batch initialization segment; `None` uses `n`, or the
    /// smallest observable length if the first `n` measurements are not.
    pub init_length: Option<usize>,
}

impl UfirConfig {
    pub fn new(horizon: usize) -> Self {
        UfirConfig {
            horizon,
            init_length: None,
        }
    }

    pub fn with_init_length(mut self, j: usize) -> Self {
        self.init_length = Some(j);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        match self.init_length {
            Some(j) if j == 0 || j > self.horizon => Err(Error::InvalidArgument(format!(
                "init length {j} must lie in 1..={}",
                self.horizon
            ))),
            _ => Ok(()),
        }
    }
}

fn check_observable(model: &ModelSequence, c: &DMatrix<f64>, end: Step, len: usize) -> Result<()> {
    if window_observable_with_tol(c, model.state_dim(), model.rank_tolerance()) {
        Ok(())
    } else {
        Err(Error::NotObservable {
            step: end,
            detail: format!("stacked observation matrix over {len} measurements is rank deficient"),
        })
    }
}

/// Least-squares start over `segment`:
/// `x̂_s = (CᵀC)⁻¹CᵀY`, then `x̂ = Φ x̂_s` and `G = Φ (CᵀC)⁻¹ Φᵀ` at the
/// segment's last index.
pub fn ufir_batch_init<'a>(
    model: &ModelSequence,
    segment: impl Into<WindowView<'a>>,
) -> Result<UfirEstimate> {
    let segment = segment.into();
    if segment.is_empty() {
        return Err(Error::InvalidArgument(
            "empty initialization segment".into(),
        ));
    }
    let end = segment.end();
    let c = stacked_observation(model, segment.start, segment.len())?;
    check_observable(model, &c, end, segment.len())?;
    let gram = c.transpose() * &c;
    let chol = linalg::spd_factor(&gram).ok_or_else(|| Error::NotObservable {
        step: end,
        detail: "Gram matrix CᵀC is numerically singular".into(),
    })?;
    let x_start = chol.solve(&(c.transpose() * segment.stacked()));
    let phi = transition_product(model, segment.start, end)?;
    let g = linalg::symmetrized(&phi * chol.inverse() * phi.transpose());
    Ok(UfirEstimate {
        index: end,
        x_hat: phi * x_start,
        g,
    })
}

/// Buffers reused across in-place UFIR steps.
struct UfirScratch {
    ft: DMatrix<f64>,
    b: DMatrix<f64>,
    g_pred: DMatrix<f64>,
    hg: DMatrix<f64>,
    solved: DMatrix<f64>,
    ht: DMatrix<f64>,
    s: DMatrix<f64>,
    factor: DMatrix<f64>,
    gain: DMatrix<f64>,
    innovation: DVector<f64>,
    x_pred: DVector<f64>,
}

impl UfirScratch {
    fn new(n: usize, m: usize) -> Self {
        UfirScratch {
            ft: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, n),
            g_pred: DMatrix::zeros(n, n),
            hg: DMatrix::zeros(m, n),
            solved: DMatrix::zeros(m, n),
            ht: DMatrix::zeros(n, m),
            s: DMatrix::zeros(m, m),
            factor: DMatrix::zeros(m, m),
            gain: DMatrix::zeros(n, m),
            innovation: DVector::zeros(m),
            x_pred: DVector::zeros(n),
        }
    }
}

/// One predictor/corrector cycle. `G_l = (G⁻¹_{l|l−1} + HᵀH)⁻¹` is evaluated
/// as `G⁻ − G⁻Hᵀ(I + HG⁻Hᵀ)⁻¹HG⁻`, which never inverts `G⁻`.
pub fn ufir_iterate_step(
    model: &ModelSequence,
    l: Step,
    prior: &UfirEstimate,
    y: &DVector<f64>,
) -> Result<(UfirEstimate, StepDiagnostics)> {
    let mut est = prior.clone();
    let mut ws = UfirScratch::new(model.state_dim(), model.measurement_dim());
    step_in_place(model, l, &mut est, y, &mut ws)?;
    let diag = StepDiagnostics {
        index: l,
        gain: ws.gain,
        innovation: ws.innovation,
    };
    Ok((est, diag))
}

fn step_in_place(
    model: &ModelSequence,
    l: Step,
    est: &mut UfirEstimate,
    y: &DVector<f64>,
    ws: &mut UfirScratch,
) -> Result<()> {
    if est.index != l - 1 {
        return Err(Error::InvalidArgument(format!(
            "prior has index {}, expected {}",
            est.index,
            l - 1
        )));
    }
    let (n, m) = (model.state_dim(), model.measurement_dim());
    if y.len() != m || est.x_hat.len() != n || est.g.shape() != (n, n) {
        return Err(Error::Model(
            "UFIR step dimensions do not match the model".into(),
        ));
    }
    let f = model.transition(l);
    let h = model.observation(l);

    ws.x_pred.gemv(1.0, f, &est.x_hat, 0.0);
    f.transpose_to(&mut ws.ft);
    ws.b.gemm(1.0, &est.g, &ws.ft, 0.0);
    ws.g_pred.gemm(1.0, f, &ws.b, 0.0);
    symmetrize(&mut ws.g_pred);

    // S = I + H G⁻ Hᵀ; G = G⁻ − (HG⁻)ᵀ S⁻¹ (HG⁻).
    ws.hg.gemm(1.0, h, &ws.g_pred, 0.0);
    h.transpose_to(&mut ws.ht);
    ws.s.gemm(1.0, &ws.hg, &ws.ht, 0.0);
    for i in 0..m {
        ws.s[(i, i)] += 1.0;
    }
    let chol = spd_factor_into(&mut ws.factor, &ws.s).ok_or(Error::Singular {
        step: l,
        what: "I + H G Hᵀ",
    })?;
    est.g.copy_from(&ws.g_pred);
    ws.solved.copy_from(&ws.hg);
    chol.solve_mut(&mut ws.solved);
    est.g.gemm_tr(-1.0, &ws.hg, &ws.solved, 1.0);
    symmetrize(&mut est.g);
    ws.factor = chol.unpack();

    ws.gain.gemm(1.0, &est.g, &ws.ht, 0.0);
    ws.innovation.copy_from(y);
    ws.innovation.gemv(-1.0, h, &ws.x_pred, 1.0);
    est.x_hat.copy_from(&ws.x_pred);
    est.x_hat.gemv(1.0, &ws.gain, &ws.innovation, 1.0);
    est.index = l;
    Ok(())
}

/// UFIR estimate at `window.end()` from exactly `cfg.horizon` measurements.
pub fn ufir_window_estimate<'a>(
    model: &ModelSequence,
    window: impl Into<WindowView<'a>>,
    cfg: &UfirConfig,
) -> Result<UfirEstimate> {
    let window = window.into();
    cfg.validate()?;
    if window.len() != cfg.horizon {
        return Err(Error::InvalidArgument(format!(
            "window holds {} measurements, horizon is {}",
            window.len(),
            cfg.horizon
        )));
    }
    let j = match cfg.init_length {
        Some(j) => j,
        None => default_init_length(model, window.start, cfg.horizon)?,
    };
    let mut est = ufir_batch_init(model, window.head(j))?;
    let mut ws = UfirScratch::new(model.state_dim(), model.measurement_dim());
    for (l, y) in window.tail(j).iter() {
        step_in_place(model, l, &mut est, y, &mut ws)?;
    }
    Ok(est)
}

/// One estimate per full window of `stream`, in order.
pub fn ufir_run(
    model: &ModelSequence,
    stream: &MeasurementWindow,
    cfg: &UfirConfig,
) -> Result<Vec<UfirEstimate>> {
    cfg.validate()?;
    if stream.len() < cfg.horizon {
        return Err(Error::InvalidArgument(format!(
            "stream of {} measurements is shorter than the horizon {}",
            stream.len(),
            cfg.horizon
        )));
    }
    let first_end = stream.start + cfg.horizon as Step - 1;
    (first_end..=stream.end())
        .map(|end| {
            let window = stream
                .view_ending_at(end, cfg.horizon)
                .expect("window inside stream");
            ufir_window_estimate(model, window, cfg)
        })
        .collect()
}

/// Full-window least squares `Φ(k, s)(CᵀC)⁻¹CᵀY`, solved by SVD. Reference
/// value for [`ufir_window_estimate`].
pub fn ufir_batch_oracle<'a>(
    model: &ModelSequence,
    window: impl Into<WindowView<'a>>,
) -> Result<DVector<f64>> {
    let window = window.into();
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let c = stacked_observation(model, window.start, window.len())?;
    check_observable(model, &c, window.end(), window.len())?;
    let x_start = c
        .svd(true, true)
        .solve(&window.stacked(), 0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(transition_product(model, window.start, window.end())? * x_start)
}
