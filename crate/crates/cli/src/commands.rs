//! The `run`, `sweep` and `compare` subcommands. Each returns the CSV body
//! and a short human-readable summary.

use std::fmt::Write;

use firkit_core::horizon::track;
use firkit_core::{
    compare_filters, minimal_horizon_for_rhkf, mse_sweep, select_optimal_horizon,
    simulate_trajectory, CompareEntry, FilterSpec, Step,
};

use crate::config::Experiment;
use crate::error::CliError;

pub struct Report {
    pub csv: String,
    pub summary: String,
}

/// One simulated trajectory (run 0), every filter's estimate and error.
///
/// Columns: `k,filter,xhat_1..xhat_n,err_1..err_n`, where `err = xhat − x`.
/// The Kalman filter reports from `k = 1`, FIR filters from `k = N`.
pub fn run(exp: &Experiment) -> Result<Report, CliError> {
    for f in &exp.filters {
        f.require_horizon()?;
        if f.horizon > exp.sim.steps {
            return Err(CliError::config(format!(
                "filter `{}`: horizon {} exceeds {} steps",
                f.label, f.horizon, exp.sim.steps
            )));
        }
    }
    let n = exp.truth.state_dim();
    let traj = simulate_trajectory(&exp.truth, &exp.sim, 0)?;

    let mut csv = String::from("k,filter");
    for i in 1..=n {
        let _ = write!(csv, ",xhat_{i}");
    }
    for i in 1..=n {
        let _ = write!(csv, ",err_{i}");
    }
    csv.push('\n');
    let mut summary = String::new();
    for f in &exp.filters {
        let from: Step = if f.spec.is_fir() {
            f.horizon as Step
        } else {
            1
        };
        let est = track(
            &f.spec,
            f.horizon,
            &f.model,
            &traj.measurements,
            &exp.kf_prior,
            from,
        )?;
        let mut sq = 0.0;
        for (i, x_hat) in est.iter().enumerate() {
            let k = from + i as Step;
            let err = x_hat - traj.state(k).expect("estimate inside trajectory");
            sq += err.norm_squared();
            let _ = write!(csv, "{k},{}", f.label);
            for v in x_hat.iter().chain(err.iter()) {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        let rmse = (sq / est.len().max(1) as f64).sqrt();
        let _ = writeln!(
            summary,
            "{}: {} estimates, rms error {rmse}",
            f.label,
            est.len()
        );
    }
    Ok(Report { csv, summary })
}

/// Monte-Carlo MSE over the `horizons` grid; reports `N_opt` for UFIR and
/// the smallest near-optimal horizon for RHKF.
pub fn sweep(exp: &Experiment) -> Result<Report, CliError> {
    if exp.horizons.is_empty() {
        return Err(CliError::config("sweep needs a nonempty `horizons` list"));
    }
    if let Some(f) = exp.filters.iter().find(|f| f.own_mismatch) {
        return Err(CliError::config(format!(
            "filter `{}`: sweep uses one assumed model; move the mismatch to the top level",
            f.label
        )));
    }
    let specs: Vec<FilterSpec> = exp.filters.iter().map(|f| f.spec).collect();
    let result = mse_sweep(
        &exp.truth,
        &exp.assumed,
        &specs,
        &exp.horizons,
        &exp.sim,
        &exp.kf_prior,
    )?;

    let mut summary = String::new();
    for spec in &specs {
        let name = spec.name();
        let agg = result.aggregate(name)?;
        match spec {
            FilterSpec::Kf => {
                let _ = writeln!(summary, "kf: mse {}", agg[0]);
            }
            FilterSpec::Ufir { .. } => {
                let best = select_optimal_horizon(&result, name)?;
                let _ = writeln!(summary, "ufir: N_opt = {best}");
            }
            FilterSpec::Rhkf { .. } => {
                let best = minimal_horizon_for_rhkf(&result, exp.slack)?;
                let _ = writeln!(summary, "rhkf: N_min = {best} (slack {})", exp.slack);
            }
        }
    }
    let _ = writeln!(
        summary,
        "{} runs, {} scored steps per run, seed {}",
        result.runs, result.scored_steps, result.seed
    );
    Ok(Report {
        csv: result.to_csv(),
        summary,
    })
}

/// Side-by-side MSE and mean pairwise estimate distance.
pub fn compare(exp: &Experiment) -> Result<Report, CliError> {
    let mut entries = Vec::with_capacity(exp.filters.len());
    for f in &exp.filters {
        f.require_horizon()?;
        entries.push(CompareEntry {
            label: f.label.clone(),
            filter: f.spec,
            horizon: f.horizon,
            model: f.model.clone(),
        });
    }
    let result = compare_filters(&exp.truth, &entries, &exp.sim, &exp.kf_prior)?;
    let mut summary = String::new();
    for label in &result.labels {
        let _ = writeln!(summary, "{label}: mse {}", result.aggregate_mse(label)?);
    }
    let _ = writeln!(
        summary,
        "{} runs, {} scored steps per run, seed {}",
        result.runs, result.scored_steps, result.seed
    );
    Ok(Report {
        csv: result.to_csv(),
        summary,
    })
}
