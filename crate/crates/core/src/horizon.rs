//! Monte-Carlo horizon experiments.
//!
//! [`mse_sweep`] simulates the true model, feeds every filter the assumed
//! model and scores squared errors against the truth for each horizon `N` in
//! a grid. All filters and horizons are scored on the same index set, which
//! starts where the longest horizon first has a full window. Runs are
//! independent (see [`crate::simkit::run_seed`]) and evaluated in parallel;
//! the reduction is done in run order so results do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kalman::kf_run;
use crate::model::{
    default_init_length, MeasurementWindow, ModelSequence, StateEstimate, Step, WindowView,
};
use crate::rhkf::{recommended_strategy, rhkf_window_estimate, InitStrategy, RhkfConfig};
use crate::simkit::{simulate_trajectory, SimConfig, Trajectory};
use crate::ufir::{ufir_window_estimate, UfirConfig};

/// Smallest number of scored output steps a sweep accepts.
pub const MIN_SCORED_STEPS: usize = 20;

/// A filter and its settings, apart from the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSpec {
    Kf,
    /// `init: None` picks [`recommended_strategy`] over the simulated range.
    Rhkf {
        init: Option<InitStrategy>,
        init_length: Option<usize>,
    },
    Ufir {
        init_length: Option<usize>,
    },
}

impl FilterSpec {
    pub fn rhkf() -> Self {
        FilterSpec::Rhkf {
            init: None,
            init_length: None,
        }
    }

    pub fn ufir() -> Self {
        FilterSpec::Ufir { init_length: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Kf => "kf",
            FilterSpec::Rhkf { .. } => "rhkf",
            FilterSpec::Ufir { .. } => "ufir",
        }
    }

    /// Whether the filter works on a finite horizon.
    pub fn is_fir(&self) -> bool {
        !matches!(self, FilterSpec::Kf)
    }
}

/// Estimates of one filter for every `k` in `from..=stream.end()`.
///
/// The Kalman filter runs over the whole stream starting from `kf_prior`
/// (indexed `stream.start − 1`); FIR filters need `from ≥ stream.start + N − 1`
/// and recompute every window from scratch.
pub fn track(
    filter: &FilterSpec,
    horizon: usize,
    model: &ModelSequence,
    stream: &MeasurementWindow,
    kf_prior: &StateEstimate,
    from: Step,
) -> Result<Vec<DVector<f64>>> {
    if stream.is_empty() || from > stream.end() {
        return Ok(Vec::new());
    }
    if from < stream.start {
        return Err(Error::InvalidArgument(format!(
            "no measurement before index {}",
            stream.start
        )));
    }
    match *filter {
        FilterSpec::Kf => {
            let skip = (from - stream.start) as usize;
            Ok(kf_run(model, kf_prior, stream)?
                .into_iter()
                .skip(skip)
                .map(|(e, _)| e.x_hat)
                .collect())
        }
        FilterSpec::Rhkf { init, init_length } => {
            let strategy =
                init.unwrap_or_else(|| recommended_strategy(model, stream.start, stream.end()));
            let init_length = match strategy {
                InitStrategy::BatchLeastSquares => {
                    shared_init_length(model, stream, horizon, from, init_length)?
                }
                InitStrategy::ZeroInformation => init_length,
            };
            let cfg = RhkfConfig {
                horizon,
                init_strategy: strategy,
                init_length,
            };
            windows(stream, horizon, from)?
                .map(|w| rhkf_window_estimate(model, w, &cfg).map(|e| e.x_hat))
                .collect()
        }
        FilterSpec::Ufir { init_length } => {
            let init_length = shared_init_length(model, stream, horizon, from, init_length)?;
            let cfg = UfirConfig {
                horizon,
                init_length,
            };
            windows(stream, horizon, from)?
                .map(|w| ufir_window_estimate(model, w, &cfg).map(|e| e.x_hat))
                .collect()
        }
    }
}

/// A time-invariant model has the same default init length in every window,
/// so it is resolved once instead of per window.
fn shared_init_length(
    model: &ModelSequence,
    stream: &MeasurementWindow,
    horizon: usize,
    from: Step,
    explicit: Option<usize>,
) -> Result<Option<usize>> {
    let first_full = stream.start + horizon as Step - 1;
    if explicit.is_some() || !model.overrides().is_empty() || horizon == 0 || from < first_full {
        return Ok(explicit);
    }
    default_init_length(model, from - horizon as Step + 1, horizon).map(Some)
}

fn windows(
    stream: &MeasurementWindow,
    horizon: usize,
    from: Step,
) -> Result<impl Iterator<Item = WindowView<'_>> + '_> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let first_full = stream.start + horizon as Step - 1;
    if from < first_full {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} has no full window ending at {from}"
        )));
    }
    Ok((from..=stream.end()).map(move |k| {
        stream
            .view_ending_at(k, horizon)
            .expect("window inside stream")
    }))
}

/// Monte-Carlo MSE per filter and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub horizon_values: Vec<usize>,
    /// filter name → one per-component MSE vector per horizon.
    pub mse: BTreeMap<String, Vec<DVector<f64>>>,
    pub runs: usize,
    pub seed: u64,
    /// Output steps scored per run.
    pub scored_steps: usize,
}

impl SweepResult {
    /// Aggregate (trace) MSE per horizon.
    pub fn aggregate(&self, filter: &str) -> Result<Vec<f64>> {
        let rows = self
            .mse
            .get(filter)
            .ok_or_else(|| Error::UnknownFilter(filter.to_string()))?;
        Ok(rows.iter().map(|v| v.sum()).collect())
    }

    /// CSV with columns `N,filter,component,mse,runs,seed`; component is the
    /// 1-based state index or `trace`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,filter,component,mse,runs,seed\n");
        for (i, n) in self.horizon_values.iter().enumerate() {
            for (name, rows) in &self.mse {
                let row = &rows[i];
                for (c, v) in row.iter().enumerate() {
                    let _ = writeln!(out, "{n},{name},{},{v},{},{}", c + 1, self.runs, self.seed);
                }
                let _ = writeln!(
                    out,
                    "{n},{name},trace,{},{},{}",
                    row.sum(),
                    self.runs,
                    self.seed
                );
            }
        }
        out
    }
}

fn check_scoring(steps: usize, longest: usize) -> Result<Step> {
    let longest = longest.max(1);
    if steps < longest || steps - longest + 1 < MIN_SCORED_STEPS {
        return Err(Error::InvalidArgument(format!(
            "{steps} steps leave fewer than {MIN_SCORED_STEPS} scored outputs for horizon {longest}"
        )));
    }
    Ok(longest as Step)
}

fn squared_errors(estimates: &[DVector<f64>], truth: &Trajectory, from: Step) -> DVector<f64> {
    let mut acc = DVector::zeros(truth.states[0].len());
    for (i, x_hat) in estimates.iter().enumerate() {
        let x = truth
            .state(from + i as Step)
            .expect("scored index inside trajectory");
        acc += (x_hat - x).map(|e| e * e);
    }
    acc
}

/// Monte-Carlo MSE of each filter for each horizon in `horizons`.
///
/// Run `i` simulates `truth` with [`simulate_trajectory`]`(truth, sim, i)`;
/// the Kalman filter starts from `kf_prior` at index 0 and is reported with
/// the same value for every horizon.
pub fn mse_sweep(
    truth: &ModelSequence,
    assumed: &ModelSequence,
    filters: &[FilterSpec],
    horizons: &[usize],
    sim: &SimConfig,
    kf_prior: &StateEstimate,
) -> Result<SweepResult> {
    sim.validate(truth.state_dim())?;
    if filters.is_empty() || horizons.is_empty() {
        return Err(Error::InvalidArgument(
            "a sweep needs at least one filter and one horizon".into(),
        ));
    }
    if horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    let mut names: Vec<&str> = filters.iter().map(|f| f.name()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(
            "each filter kind may appear once in a sweep".into(),
        ));
    }
    let longest = if filters.iter().any(|f| f.is_fir()) {
        *horizons.last().unwrap()
    } else {
        1
    };
    let from = check_scoring(sim.steps, longest)?;
    let scored = sim.steps - from as usize + 1;

    let per_run = |run: usize| -> Result<Vec<Vec<DVector<f64>>>> {
        let traj = simulate_trajectory(truth, sim, run as u64)?;
        let mut rows = Vec::with_capacity(filters.len());
        for filter in filters {
            if filter.is_fir() {
                let per_n = horizons
                    .iter()
                    .map(|&n| {
                        let est = track(filter, n, assumed, &traj.measurements, kf_prior, from)?;
                        Ok(squared_errors(&est, &traj, from))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(per_n);
            } else {
                let est = track(filter, 1, assumed, &traj.measurements, kf_prior, from)?;
                rows.push(vec![squared_errors(&est, &traj, from); horizons.len()]);
            }
        }
        Ok(rows)
    };
    let all: Vec<_> = (0..sim.runs)
        .into_par_iter()
        .map(per_run)
        .collect::<Result<Vec<_>>>()?;

    let denom = (sim.runs * scored) as f64;
    let mut mse = BTreeMap::new();
    for (fi, filter) in filters.iter().enumerate() {
        let rows = (0..horizons.len())
            .map(|ni| {
                let mut sum = DVector::zeros(truth.state_dim());
                for run in &all {
                    sum += &run[fi][ni];
                }
                sum / denom
            })
            .collect();
        mse.insert(filter.name().to_string(), rows);
    }
    Ok(SweepResult {
        horizon_values: horizons.to_vec(),
        mse,
        runs: sim.runs,
        seed: sim.seed,
        scored_steps: scored,
    })
}

/// Horizon with the smallest aggregate MSE; ties go to the smaller `N`.
pub fn select_optimal_horizon(result: &SweepResult, filter: &str) -> Result<usize> {
    let agg = result.aggregate(filter)?;
    let mut best = 0;
    for (i, v) in agg.iter().enumerate() {
        if *v < agg[best] {
            best = i;
        }
    }
    Ok(result.horizon_values[best])
}

/// Smallest horizon whose aggregate MSE is within `(1 + slack)` of the best.
pub fn minimal_adequate_horizon(result: &SweepResult, filter: &str, slack: f64) -> Result<usize> {
    if slack.is_nan() || slack < 0.0 {
        return Err(Error::InvalidArgument("slack must be non-negative".into()));
    }
    let agg = result.aggregate(filter)?;
    let best = agg.iter().copied().fold(f64::INFINITY, f64::min);
    let idx = agg
        .iter()
        .position(|&v| v <= (1.0 + slack) * best)
        .unwrap_or(agg.len() - 1);
    Ok(result.horizon_values[idx])
}

/// [`minimal_adequate_horizon`] for the RHKF entry: since a longer horizon
/// does not hurt RHKF, the smallest near-optimal `N` is the cheapest choice.
pub fn minimal_horizon_for_rhkf(result: &SweepResult, slack: f64) -> Result<usize> {
    minimal_adequate_horizon(result, "rhkf", slack)
}

/// One filter taking part in a side-by-side comparison.
#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub label: String,
    pub filter: FilterSpec,
    /// Ignored for the Kalman filter.
    pub horizon: usize,
    /// Model the filter assumes.
    pub model: ModelSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareResult {
    pub labels: Vec<String>,
    /// Per-component MSE, in `labels` order.
    pub mse: Vec<DVector<f64>>,
    /// `(a, b, mean ‖x̂_a − x̂_b‖)` for every pair `a` before `b`.
    pub differences: Vec<(String, String, f64)>,
    pub runs: usize,
    pub seed: u64,
    pub scored_steps: usize,
}

impl CompareResult {
    pub fn aggregate_mse(&self, label: &str) -> Result<f64> {
        let i = self.index(label)?;
        Ok(self.mse[i].sum())
    }

    pub fn difference(&self, a: &str, b: &str) -> Result<f64> {
        self.differences
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .map(|d| d.2)
            .ok_or_else(|| Error::UnknownFilter(format!("{a}/{b}")))
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownFilter(label.to_string()))
    }

    /// CSV with columns `metric,filter,other,value`: one `mse` row per filter
    /// (aggregate) and one `diff` row per pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,filter,other,value\n");
        for (label, m) in self.labels.iter().zip(&self.mse) {
            let _ = writeln!(out, "mse,{label},,{}", m.sum());
        }
        for (a, b, d) in &self.differences {
            let _ = writeln!(out, "diff,{a},{b},{d}");
        }
        out
    }
}

/// MSE of every entry and the mean estimate distance between every pair,
/// over the indices where all entries have output.
pub fn compare_filters(
    truth: &ModelSequence,
    entries: &[CompareEntry],
    sim: &SimConfig,
    kf_prior: &StateEstimate,
) -> Result<CompareResult> {
    sim.validate(truth.state_dim())?;
    if entries.is_empty() {
        return Err(Error::InvalidArgument("nothing to compare".into()));
    }
    let longest = entries
        .iter()
        .filter(|e| e.filter.is_fir())
        .map(|e| e.horizon)
        .max()
        .unwrap_or(1);
    let from = check_scoring(sim.steps, longest)?;
    let scored = sim.steps - from as usize + 1;
    let pairs: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|a| ((a + 1)..entries.len()).map(move |b| (a, b)))
        .collect();

    let per_run = |run: usize| -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        let traj = simulate_trajectory(truth, sim, run as u64)?;
        let tracks = entries
            .iter()
            .map(|e| {
                track(
                    &e.filter,
                    e.horizon,
                    &e.model,
                    &traj.measurements,
                    kf_prior,
                    from,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let errs = tracks
            .iter()
            .map(|t| squared_errors(t, &traj, from))
            .collect();
        let diffs = pairs
            .iter()
            .map(|&(a, b)| {
                tracks[a]
                    .iter()
                    .zip(&tracks[b])
                    .map(|(x, y)| (x - y).norm())
                    .sum()
            })
            .collect();
        Ok((errs, diffs))
    };
    let all: Vec<_> = (0..sim.runs)
        .into_par_iter()
        .map(per_run)
        .collect::<Result<Vec<_>>>()?;

    let denom = (sim.runs * scored) as f64;
    let mse = (0..entries.len())
        .map(|i| {
            let mut sum = DVector::zeros(truth.state_dim());
            for (errs, _) in &all {
                sum += &errs[i];
            }
            sum / denom
        })
        .collect();
    let differences = pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            let total: f64 = all.iter().map(|(_, d)| d[p]).sum();
            (
                entries[a].label.clone(),
                entries[b].label.clone(),
                total / denom,
            )
        })
        .collect();
    Ok(CompareResult {
        labels: entries.iter().map(|e| e.label.clone()).collect(),
        mse,
        differences,
        runs: sim.runs,
        seed: sim.seed,
        scored_steps: scored,
    })
}
