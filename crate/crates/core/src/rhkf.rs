//! Receding-horizon Kalman FIR filter.
//!
//! For every output index `k` the information filter is rerun over the `N`
//! most recent measurements `y_{k−N+1} … y_k`, starting from a horizon-local
//! initialization. Nothing is carried from one window to the next, so each
//! output costs `N` filter cycles, roughly `N` times the cost of a Kalman step.
//!
//! Two initializations are provided:
//!
//! * [`InitStrategy::ZeroInformation`]: `(ẑ, Z) = (0, 0)` at `k − N`, i.e. an
//!   infinite-covariance prior. Requires invertible `F` on the window and `Q`
//!   either positive definite or exactly zero at every step.
//! * [`InitStrategy::BatchLeastSquares`]: an `R`-weighted least-squares fit
//!   over the first `J` measurements (process noise ignored on that span),
//!   after which the information filter takes over.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kalman::{self, if_update, info_to_state, state_to_info, InfoScratch};
use crate::linalg::{self, spd_factor};
use crate::model::{
    default_init_length, stacked_observation, transition_product, InfoEstimate, MeasurementWindow,
    ModelSequence, ProcessNoise, StateEstimate, Step, WindowView,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    #[default]
    ZeroInformation,
    BatchLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhkfConfig {
    /// Horizon length `N`: measurements per window.
    pub horizon: usize,
    pub init_strategy: InitStrategy,
    /// `J` for [`InitStrategy::BatchLeastSquares`]; `None` picks the default
    /// observable length per window.
    pub init_length: Option<usize>,
}

impl RhkfConfig {
    pub fn new(horizon: usize) -> Self {
        RhkfConfig {
            horizon,
            init_strategy: InitStrategy::ZeroInformation,
            init_length: None,
        }
    }

    pub fn batch(horizon: usize) -> Self {
        RhkfConfig {
            horizon,
            init_strategy: InitStrategy::BatchLeastSquares,
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
        if let Some(j) = self.init_length {
            if j == 0 || j > self.horizon {
                return Err(Error::InvalidArgument(format!(
                    "init length {j} must lie in 1..={}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Picks zero-information initialization unless some step in `from..=to`
/// has a non-invertible `F` or a singular nonzero `Q`.
pub fn recommended_strategy(model: &ModelSequence, from: Step, to: Step) -> InitStrategy {
    let zero_info_ok = (from..=to).all(|k| {
        let q_ok = !matches!(model.process_noise_structure(k - 1), ProcessNoise::Singular);
        q_ok && linalg::checked_inverse(model.transition(k)).is_some()
    });
    if zero_info_ok {
        InitStrategy::ZeroInformation
    } else {
        InitStrategy::BatchLeastSquares
    }
}

/// `R`-weighted least squares over `segment`, propagated without process
/// noise to the segment's last index.
///
/// Returns `(x̂, P)` at `segment.end()`; `P` is singular when the transition
/// product over the segment is.
pub fn weighted_batch_init<'a>(
    model: &ModelSequence,
    segment: impl Into<WindowView<'a>>,
) -> Result<StateEstimate> {
    let segment = segment.into();
    if segment.is_empty() {
        return Err(Error::InvalidArgument(
            "empty initialization segment".into(),
        ));
    }
    let (n, m) = (model.state_dim(), model.measurement_dim());
    let s = segment.start;
    let c = stacked_observation(model, s, segment.len())?;
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (i, (k, y)) in segment.iter().enumerate() {
        let block = c.rows(i * m, m);
        let r_chol = spd_factor(model.measurement_noise(k)).ok_or(Error::Singular {
            step: k,
            what: "measurement noise R",
        })?;
        let weighted = r_chol.solve(&block.into_owned());
        gram += block.transpose() * &weighted;
        rhs += weighted.transpose() * y;
    }
    let gram_chol = spd_factor(&gram).ok_or_else(|| Error::NotObservable {
        step: segment.end(),
        detail: format!(
            "initialization segment of length {} is rank deficient",
            segment.len()
        ),
    })?;
    let x_start = gram_chol.solve(&rhs);
    let p_start = linalg::symmetrized(gram_chol.inverse());
    let phi = transition_product(model, s, segment.end())?;
    Ok(StateEstimate {
        index: segment.end(),
        x_hat: &phi * x_start,
        p: linalg::symmetrized(&phi * p_start * phi.transpose()),
    })
}

/// Runs the information filter over `window` from `prior` (indexed
/// `window.start − 1`) and converts the final estimate to covariance form.
pub fn rhkf_window_from_prior<'a>(
    model: &ModelSequence,
    window: impl Into<WindowView<'a>>,
    prior: &InfoEstimate,
) -> Result<StateEstimate> {
    let window = window.into();
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let mut current = prior.clone();
    let mut ws = InfoScratch::for_model(model);
    for (k, y) in window.iter() {
        kalman::if_step_in_place(model, k, &mut current, y, &mut ws)?;
    }
    info_to_state(&current)
}

/// RHKF estimate at `window.end()` from exactly `cfg.horizon` measurements.
pub fn rhkf_window_estimate<'a>(
    model: &ModelSequence,
    window: impl Into<WindowView<'a>>,
    cfg: &RhkfConfig,
) -> Result<StateEstimate> {
    let window = window.into();
    cfg.validate()?;
    if window.len() != cfg.horizon {
        return Err(Error::InvalidArgument(format!(
            "window holds {} measurements, horizon is {}",
            window.len(),
            cfg.horizon
        )));
    }
    match cfg.init_strategy {
        InitStrategy::ZeroInformation => {
            let prior = InfoEstimate::zero(window.start - 1, model.state_dim());
            rhkf_window_from_prior(model, window, &prior)
        }
        InitStrategy::BatchLeastSquares => {
            let j = match cfg.init_length {
                Some(j) => j,
                None => default_init_length(model, window.start, cfg.horizon)?,
            };
            let seed = weighted_batch_init(model, window.head(j))?;
            let rest = window.tail(j);
            if rest.is_empty() {
                return Ok(seed);
            }
            match state_to_info(&seed) {
                Ok(info) => rhkf_window_from_prior(model, rest, &info),
                Err(Error::Singular { .. }) => {
                    // Singular transition over the init span: cross into
                    // information form one step later, after process noise
                    // has been added.
                    let (k, y) = (rest.start, &rest.measurements[0]);
                    let predicted = state_to_info(&kalman::kf_predict(model, k, &seed)?)?;
                    let first = if_update(model, k, &predicted, y)?;
                    let remaining = rest.tail(1);
                    if remaining.is_empty() {
                        info_to_state(&first)
                    } else {
                        rhkf_window_from_prior(model, remaining, &first)
                    }
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// One estimate per full window of `stream`, in order. Windows are
/// recomputed from scratch.
pub fn rhkf_run(
    model: &ModelSequence,
    stream: &MeasurementWindow,
    cfg: &RhkfConfig,
) -> Result<Vec<StateEstimate>> {
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
            rhkf_window_estimate(model, window, cfg)
        })
        .collect()
}
