//! Seeded simulation of the state-space model and model-mismatch injection.
//!
//! Run `i` of a Monte-Carlo experiment with master seed `s` draws from a
//! `ChaCha8Rng` seeded with [`run_seed`]`(s, i)`. Each step `k = 1..=steps`
//! consumes `n` standard normals for `w_{k−1}` followed by `m` for `v_k`
//! (Ziggurat sampler from `rand_distr`), mapped through a PSD square root of
//! the covariance. Streams are reproducible for a given build; equality of
//! streams across other implementations is not a goal.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{MeasurementWindow, ModelOverride, ModelSequence, NoiseCheck, Step};

const NEG_EIG_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub steps: usize,
    /// True initial state `x_0`.
    pub x0: DVector<f64>,
    pub runs: usize,
}

impl SimConfig {
    pub fn new(seed: u64, steps: usize, x0: DVector<f64>, runs: usize) -> Self {
        SimConfig {
            seed,
            steps,
            x0,
            runs,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.steps == 0 || self.runs == 0 {
            return Err(Error::InvalidArgument(
                "steps and runs must be at least 1".into(),
            ));
        }
        if self.x0.len() != n {
            return Err(Error::InvalidArgument(format!(
                "x0 has length {}, expected {n}",
                self.x0.len()
            )));
        }
        Ok(())
    }
}

/// Simulated truth `x_1..x_steps` and measurements `y_1..y_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: MeasurementWindow,
}

impl Trajectory {
    pub fn state(&self, k: Step) -> Option<&DVector<f64>> {
        usize::try_from(k - 1).ok().and_then(|i| self.states.get(i))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run seed: `splitmix64(master ^ splitmix64(run_index))`.
pub fn run_seed(master: u64, run_index: u64) -> u64 {
    splitmix64(master ^ splitmix64(run_index))
}

pub fn run_rng(master: u64, run_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(run_seed(master, run_index))
}

/// Zero-mean Gaussian with covariance `L Lᵀ`, where `L = V √max(Λ, 0)` from
/// the symmetric eigendecomposition. A zero covariance yields exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let eig = crate::linalg::symmetrized(cov.clone()).symmetric_eigen();
        if let Some(lo) = eig.eigenvalues.iter().copied().reduce(f64::min) {
            if lo < NEG_EIG_TOL {
                return Err(Error::Model(format!(
                    "covariance has negative eigenvalue {lo:e}"
                )));
            }
        }
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let mut factor = eig.eigenvectors;
        for (j, r) in roots.iter().enumerate() {
            factor.column_mut(j).scale_mut(*r);
        }
        Ok(GaussianSampler { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.factor * z
    }
}

/// Samplers keyed by the address of the covariance inside the model, so each
/// distinct matrix is factored once.
struct SamplerCache<'a> {
    entries: Vec<(&'a DMatrix<f64>, GaussianSampler)>,
}

impl<'a> SamplerCache<'a> {
    fn get(&mut self, cov: &'a DMatrix<f64>) -> Result<&GaussianSampler> {
        let pos = match self.entries.iter().position(|(c, _)| std::ptr::eq(*c, cov)) {
            Some(pos) => pos,
            None => {
                self.entries.push((cov, GaussianSampler::new(cov)?));
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[pos].1)
    }
}

/// Simulates `x_k = F_k x_{k−1} + w_{k−1}`, `y_k = H_k x_k + v_k` for
/// `k = 1..=cfg.steps` using the stream of run `run_index`.
pub fn simulate_trajectory(
    model: &ModelSequence,
    cfg: &SimConfig,
    run_index: u64,
) -> Result<Trajectory> {
    cfg.validate(model.state_dim())?;
    let mut rng = run_rng(cfg.seed, run_index);
    let mut q_cache = SamplerCache {
        entries: Vec::new(),
    };
    let mut r_cache = SamplerCache {
        entries: Vec::new(),
    };
    let mut states = Vec::with_capacity(cfg.steps);
    let mut ys = Vec::with_capacity(cfg.steps);
    let mut x = cfg.x0.clone();
    for k in 1..=cfg.steps as Step {
        let w = q_cache.get(model.process_noise(k - 1))?.sample(&mut rng);
        x = model.transition(k) * x + w;
        let v = r_cache.get(model.measurement_noise(k))?.sample(&mut rng);
        ys.push(model.observation(k) * &x + v);
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        measurements: MeasurementWindow::new(1, ys),
    })
}

/// `delta` is added to the assumed `F_k` for every `k` in `from..=to`.
#[derive(Debug, Clone, PartialEq)]
pub struct FPerturbation {
    pub from: Step,
    pub to: Step,
    pub delta: DMatrix<f64>,
}

/// Discrepancy between the true model and the model handed to the filters.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSpec {
    pub q_scale: f64,
    pub r_scale: f64,
    pub f_perturb: Option<FPerturbation>,
}

impl Default for MismatchSpec {
    fn default() -> Self {
        MismatchSpec {
            q_scale: 1.0,
            r_scale: 1.0,
            f_perturb: None,
        }
    }
}

impl MismatchSpec {
    /// Checks the scales and that any perturbation lies within `1..=steps`.
    pub fn validate(&self, steps: usize) -> Result<()> {
        if !(self.q_scale > 0.0 && self.r_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "mismatch scales must be positive".into(),
            ));
        }
        if let Some(p) = &self.f_perturb {
            if p.from > p.to || p.from < 1 || p.to > steps as Step {
                return Err(Error::InvalidArgument(format!(
                    "F perturbation interval [{}, {}] must lie within [1, {steps}]",
                    p.from, p.to
                )));
            }
        }
        Ok(())
    }
}

/// Builds the assumed model: `Q ← q_scale·Q`, `R ← r_scale·R` everywhere and
/// `F ← F + delta` on the perturbation interval.
pub fn apply_mismatch(model: &ModelSequence, spec: &MismatchSpec) -> Result<ModelSequence> {
    if !(spec.q_scale > 0.0 && spec.r_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "mismatch scales must be positive".into(),
        ));
    }
    let mut extra = Vec::new();
    if let Some(p) = &spec.f_perturb {
        let n = model.state_dim();
        if p.delta.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "F perturbation must be {n}x{n}"
            )));
        }
        if p.from > p.to {
            return Err(Error::InvalidArgument(
                "F perturbation interval is empty".into(),
            ));
        }
        for k in p.from..=p.to {
            let mut o = ModelOverride::new(k, k);
            o.f = Some(model.transition(k) + &p.delta);
            extra.push(o);
        }
    }
    model.map_matrices(
        NoiseCheck::AllowSingularR,
        |q| q * spec.q_scale,
        |r| r * spec.r_scale,
        extra,
    )
}
