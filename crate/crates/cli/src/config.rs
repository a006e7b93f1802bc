//! Experiment configuration: one JSON document per experiment.
//!
//! ```json
//! {
//!   "model": "cv.json",
//!   "mismatch": { "r_scale": 100 },
//!   "filters": [
//!     { "kind": "kf" },
//!     { "kind": "rhkf", "horizon": 30, "init": "batch-least-squares" },
//!     { "kind": "ufir", "horizon": 16, "label": "ufir-true", "mismatch": { "r_scale": 1 } }
//!   ],
//!   "sim": { "seed": 7, "steps": 300, "runs": 1000, "x0": [0, 1] },
//!   "kf_prior": { "x_hat": [0, 1], "p": [[1, 0], [0, 1]] },
//!   "horizons": [2, 4, 8, 16, 32, 64],
//!   "slack": 0.05,
//!   "output": "sweep.csv"
//! }
//! ```
//!
//! Relative `model` and `output` paths are resolved against the directory
//! holding the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use firkit_core::model::matrix_from_rows;
use firkit_core::{
    apply_mismatch, DMatrix, DVector, FPerturbation, FilterSpec, InitStrategy, MismatchSpec,
    ModelSequence, SimConfig, StateEstimate,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: PathBuf,
    #[serde(default)]
    pub mismatch: Option<MismatchConfig>,
    pub filters: Vec<FilterConfig>,
    pub sim: SimSettings,
    /// Starting estimate of the Kalman filter; defaults to `(x0, I)`.
    #[serde(default)]
    pub kf_prior: Option<PriorConfig>,
    /// Horizon grid for `sweep`.
    #[serde(default)]
    pub horizons: Vec<usize>,
    /// Relative MSE slack for the RHKF minimal horizon.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub rank_tolerance: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_slack() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Kf,
    Rhkf,
    Ufir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitConfig {
    ZeroInformation,
    BatchLeastSquares,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    #[serde(default)]
    pub horizon: Option<usize>,
    /// RHKF only. Picked from the model when absent.
    #[serde(default)]
    pub init: Option<InitConfig>,
    #[serde(default)]
    pub init_length: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
    /// Replaces the experiment-wide mismatch for this filter.
    #[serde(default)]
    pub mismatch: Option<MismatchConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchConfig {
    #[serde(default = "one")]
    pub q_scale: f64,
    #[serde(default = "one")]
    pub r_scale: f64,
    #[serde(default)]
    pub f_perturb: Option<FPerturbConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FPerturbConfig {
    pub from: i64,
    pub to: i64,
    pub delta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub seed: u64,
    pub steps: usize,
    #[serde(default = "one_run")]
    pub runs: usize,
    pub x0: Vec<f64>,
}

fn one_run() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub x_hat: Vec<f64>,
    pub p: Vec<Vec<f64>>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

/// One configured filter, ready to run.
#[derive(Debug, Clone)]
pub struct PreparedFilter {
    pub label: String,
    pub spec: FilterSpec,
    /// Zero for the Kalman filter.
    pub horizon: usize,
    /// The model the filter assumes.
    pub model: ModelSequence,
    /// Whether the filter carries its own mismatch.
    pub own_mismatch: bool,
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub truth: ModelSequence,
    /// Truth with the experiment-wide mismatch applied.
    pub assumed: ModelSequence,
    pub filters: Vec<PreparedFilter>,
    pub sim: SimConfig,
    pub kf_prior: StateEstimate,
    pub horizons: Vec<usize>,
    pub slack: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Loads the model and builds every filter. `base_dir` resolves relative
    /// paths.
    pub fn prepare(&self, base_dir: &Path) -> Result<Experiment, CliError> {
        let model_path = base_dir.join(&self.model);
        let text = std::fs::read_to_string(&model_path)
            .map_err(|e| config_err(format!("cannot read model {}: {e}", model_path.display())))?;
        let mut truth = ModelSequence::from_json(&text)?;
        if let Some(tol) = self.rank_tolerance {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(config_err("rank_tolerance must lie in (0, 1)"));
            }
            truth = truth.with_rank_tolerance(tol);
        }
        let n = truth.state_dim();
        if self.sim.x0.len() != n {
            return Err(config_err(format!(
                "sim.x0 has length {}, expected {n}",
                self.sim.x0.len()
            )));
        }
        let sim = SimConfig::new(
            self.sim.seed,
            self.sim.steps,
            DVector::from_column_slice(&self.sim.x0),
            self.sim.runs,
        );
        sim.validate(n)?;

        let assumed = match &self.mismatch {
            Some(m) => mismatched(&truth, m, self.sim.steps)?,
            None => truth.clone(),
        };
        if self.filters.is_empty() {
            return Err(config_err("at least one filter is required"));
        }
        let mut filters = Vec::with_capacity(self.filters.len());
        let mut labels = HashSet::new();
        for (i, fc) in self.filters.iter().enumerate() {
            let prepared = fc.prepare(i, &truth, &assumed, self.sim.steps)?;
            if !labels.insert(prepared.label.clone()) {
                return Err(config_err(format!(
                    "duplicate filter label `{}`",
                    prepared.label
                )));
            }
            filters.push(prepared);
        }

        let kf_prior = match &self.kf_prior {
            Some(p) => {
                if p.x_hat.len() != n {
                    return Err(config_err(format!("kf_prior.x_hat must have length {n}")));
                }
                StateEstimate {
                    index: 0,
                    x_hat: DVector::from_column_slice(&p.x_hat),
                    p: matrix_from_rows("kf_prior.p", &p.p, n, n)?,
                }
            }
            None => StateEstimate {
                index: 0,
                x_hat: sim.x0.clone(),
                p: DMatrix::identity(n, n),
            },
        };
        if self.slack.is_nan() || self.slack < 0.0 {
            return Err(config_err("slack must be non-negative"));
        }
        let output = self.output.as_ref().map(|p| base_dir.join(p));
        Ok(Experiment {
            truth,
            assumed,
            filters,
            sim,
            kf_prior,
            horizons: self.horizons.clone(),
            slack: self.slack,
            output,
        })
    }
}

fn mismatched(
    truth: &ModelSequence,
    m: &MismatchConfig,
    steps: usize,
) -> Result<ModelSequence, CliError> {
    let n = truth.state_dim();
    let f_perturb = match &m.f_perturb {
        Some(p) => Some(FPerturbation {
            from: p.from,
            to: p.to,
            delta: matrix_from_rows("f_perturb.delta", &p.delta, n, n)?,
        }),
        None => None,
    };
    let spec = MismatchSpec {
        q_scale: m.q_scale,
        r_scale: m.r_scale,
        f_perturb,
    };
    spec.validate(steps)?;
    Ok(apply_mismatch(truth, &spec)?)
}

impl FilterConfig {
    fn prepare(
        &self,
        position: usize,
        truth: &ModelSequence,
        assumed: &ModelSequence,
        steps: usize,
    ) -> Result<PreparedFilter, CliError> {
        let at = |msg: &str| config_err(format!("filter #{}: {msg}", position + 1));
        let (spec, horizon) = match self.kind {
            FilterKind::Kf => {
                if self.horizon.is_some() || self.init.is_some() || self.init_length.is_some() {
                    return Err(at("kf takes no horizon, init or init_length"));
                }
                (FilterSpec::Kf, 0)
            }
            FilterKind::Rhkf => {
                let init = self.init.map(|i| match i {
                    InitConfig::ZeroInformation => InitStrategy::ZeroInformation,
                    InitConfig::BatchLeastSquares => InitStrategy::BatchLeastSquares,
                });
                let spec = FilterSpec::Rhkf {
                    init,
                    init_length: self.init_length,
                };
                (spec, self.horizon.unwrap_or(0))
            }
            FilterKind::Ufir => {
                if self.init.is_some() {
                    return Err(at("ufir takes no init strategy"));
                }
                let spec = FilterSpec::Ufir {
                    init_length: self.init_length,
                };
                (spec, self.horizon.unwrap_or(0))
            }
        };
        if let (Some(j), true) = (self.init_length, horizon > 0) {
            if j == 0 || j > horizon {
                return Err(at(&format!("init_length {j} must lie in 1..={horizon}")));
            }
        }
        let model = match &self.mismatch {
            Some(m) => mismatched(truth, m, steps)?,
            None => assumed.clone(),
        };
        let label = match &self.label {
            Some(l) if l.is_empty() || l.contains([',', '\n', '"']) => {
                return Err(at(
                    "label must be nonempty and free of commas, quotes and newlines",
                ));
            }
            Some(l) => l.clone(),
            None if horizon > 0 => format!("{}{horizon}", spec.name()),
            None => spec.name().to_string(),
        };
        Ok(PreparedFilter {
            label,
            spec,
            horizon,
            model,
            own_mismatch: self.mismatch.is_some(),
        })
    }
}

impl PreparedFilter {
    /// Horizon required by `run` and `compare`.
    pub fn require_horizon(&self) -> Result<(), CliError> {
        if self.spec.is_fir() && self.horizon == 0 {
            return Err(config_err(format!(
                "filter `{}` needs a horizon of at least 1",
                self.label
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"{"n":1,"m":1,"F":[[0.95]],"H":[[1]],"Q":[[0.04]],"R":[[1]]}"#;

    fn prepared(config: &str) -> Result<Experiment, CliError> {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.json"), MODEL).unwrap();
        ExperimentConfig::from_json(config)?.prepare(dir.path())
    }

    #[test]
    fn defaults_and_labels() {
        let exp = prepared(
            r#"{"model":"m.json","filters":[{"kind":"kf"},{"kind":"rhkf","horizon":10},{"kind":"ufir","horizon":4,"label":"u"}],
                "sim":{"seed":1,"steps":50,"x0":[0]}}"#,
        )
        .unwrap();
        let labels: Vec<_> = exp.filters.iter().map(|f| f.label.as_str()).collect();
        assert_eq!(labels, ["kf", "rhkf10", "u"]);
        assert_eq!(exp.sim.runs, 1);
        assert_eq!(exp.slack, 0.05);
        assert_eq!(exp.kf_prior.p, DMatrix::identity(1, 1));
        assert_eq!(
            exp.filters[1].spec,
            FilterSpec::Rhkf {
                init: None,
                init_length: None
            }
        );
    }

    #[test]
    fn mismatch_applies_globally_unless_overridden() {
        let exp = prepared(
            r#"{"model":"m.json","mismatch":{"r_scale":100},
                "filters":[{"kind":"kf"},{"kind":"kf","label":"kf-true","mismatch":{}}],
                "sim":{"seed":1,"steps":50,"x0":[0]}}"#,
        )
        .unwrap();
        assert_eq!(exp.filters[0].model.measurement_noise(1)[(0, 0)], 100.0);
        assert_eq!(exp.filters[1].model.measurement_noise(1)[(0, 0)], 1.0);
        assert_eq!(exp.truth.measurement_noise(1)[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"model":"m.json","filters":[],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"kf"}],"sim":{"seed":1,"steps":50,"x0":[0,1]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"kf","horizon":3}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"kf"},{"kind":"kf"}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"ufir","horizon":3,"init_length":4}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"pf"}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"kf"}],"sim":{"seed":1,"steps":50,"x0":[0]},"extra":1}"#,
            r#"{"model":"m.json","mismatch":{"r_scale":0},"filters":[{"kind":"kf"}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"missing.json","filters":[{"kind":"kf"}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
            r#"{"model":"m.json","filters":[{"kind":"kf","label":"a,b"}],"sim":{"seed":1,"steps":50,"x0":[0]}}"#,
        ];
        for text in bad {
            assert!(prepared(text).is_err(), "accepted {text}");
        }
    }
}
