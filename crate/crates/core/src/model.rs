//! Discrete time-variant linear state-space model and the value types shared
//! by every estimator.
//!
//! The model is
//!
//! ```text
//! x_k = F_k x_{k-1} + w_{k-1},   w ~ N(0, Q_{k-1})
//! y_k = H_k x_k + v_k,           v ~ N(0, R_k)
//! ```
//!
//! A [`ModelSequence`] holds constant base matrices plus an optional table of
//! overrides that replace individual matrices on closed index intervals.
//! Queries outside every override interval return the base matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// Discrete time index. Signed so that `k - 1` is always representable.
pub type Step = i64;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_EIG_FLOOR: f64 = -1e-10;
const PD_EIG_FLOOR: f64 = 1e-12;

/// The four model matrices in force at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Replaces the given matrices for every `k` in `from..=to`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOverride {
    pub from: Step,
    pub to: Step,
    pub f: Option<DMatrix<f64>>,
    pub h: Option<DMatrix<f64>>,
    pub q: Option<DMatrix<f64>>,
    pub r: Option<DMatrix<f64>>,
}

impl ModelOverride {
    pub fn new(from: Step, to: Step) -> Self {
        ModelOverride {
            from,
            to,
            f: None,
            h: None,
            q: None,
            r: None,
        }
    }

    fn covers(&self, k: Step) -> bool {
        self.from <= k && k <= self.to
    }
}

/// How strictly the measurement-noise covariance is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCheck {
    /// `R` must be positive definite. Required by every filter that weighs
    /// measurements by `R⁻¹`.
    Strict,
    /// `R` may be positive semidefinite (e.g. a noise-free truth model used
    /// only for simulation). Filters needing `R⁻¹` report a singularity.
    AllowSingularR,
}

/// Time-indexed supplier of `F_k`, `H_k`, `Q_k`, `R_k` with fixed dimensions.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSequence {
    n: usize,
    m: usize,
    base: ModelMatrices,
    overrides: Vec<ModelOverride>,
    rank_tol: f64,
    // Noise inverses, derived once: base first, then one slot per override.
    base_factors: NoiseFactors,
    override_factors: Vec<NoiseFactors>,
}

/// Process-noise structure as the information filter needs it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ProcessNoise {
    Zero,
    Definite { inverse: DMatrix<f64> },
    Singular,
}

impl ProcessNoise {
    fn classify(q: &DMatrix<f64>) -> Self {
        if linalg::is_zero(q) {
            ProcessNoise::Zero
        } else {
            linalg::spd_inverse(q).map_or(ProcessNoise::Singular, |inverse| {
                ProcessNoise::Definite { inverse }
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NoiseFactors {
    q: Option<ProcessNoise>,
    /// `Some(None)` marks a singular `R`.
    r_inv: Option<Option<DMatrix<f64>>>,
}

impl NoiseFactors {
    fn of(q: Option<&DMatrix<f64>>, r: Option<&DMatrix<f64>>) -> Self {
        NoiseFactors {
            q: q.map(ProcessNoise::classify),
            r_inv: r.map(linalg::spd_inverse),
        }
    }
}

impl ModelSequence {
    /// Builds a validated model with positive definite `R`.
    pub fn new(base: ModelMatrices, overrides: Vec<ModelOverride>) -> Result<Self> {
        Self::with_noise_check(base, overrides, NoiseCheck::Strict)
    }

    pub fn with_noise_check(
        base: ModelMatrices,
        overrides: Vec<ModelOverride>,
        check: NoiseCheck,
    ) -> Result<Self> {
        let n = base.f.nrows();
        let m = base.h.nrows();
        if n == 0 || m == 0 {
            return Err(Error::Model(
                "state and measurement dimensions must be positive".into(),
            ));
        }
        check_shape("F", &base.f, n, n)?;
        check_shape("H", &base.h, m, n)?;
        check_shape("Q", &base.q, n, n)?;
        check_shape("R", &base.r, m, m)?;
        check_process_noise(&base.q)?;
        check_measurement_noise(&base.r, check)?;
        for o in &overrides {
            if o.from > o.to {
                return Err(Error::Model(format!(
                    "override interval [{}, {}] is empty",
                    o.from, o.to
                )));
            }
            if let Some(f) = &o.f {
                check_shape("F", f, n, n)?;
            }
            if let Some(h) = &o.h {
                check_shape("H", h, m, n)?;
            }
            if let Some(q) = &o.q {
                check_shape("Q", q, n, n)?;
                check_process_noise(q)?;
            }
            if let Some(r) = &o.r {
                check_shape("R", r, m, m)?;
                check_measurement_noise(r, check)?;
            }
        }
        let base_factors = NoiseFactors::of(Some(&base.q), Some(&base.r));
        let override_factors = overrides
            .iter()
            .map(|o| NoiseFactors::of(o.q.as_ref(), o.r.as_ref()))
            .collect();
        Ok(ModelSequence {
            n,
            m,
            base,
            overrides,
            rank_tol: DEFAULT_RANK_TOL,
            base_factors,
            override_factors,
        })
    }

    /// Time-invariant model.
    pub fn constant(
        f: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(ModelMatrices { f, h, q, r }, Vec::new())
    }

    /// Scalar time-invariant model, handy for examples and tests.
    pub fn scalar(f: f64, h: f64, q: f64, r: f64) -> Result<Self> {
        let s = |v| DMatrix::from_element(1, 1, v);
        Self::constant(s(f), s(h), s(q), s(r))
    }

    pub fn with_rank_tolerance(mut self, rel_tol: f64) -> Self {
        self.rank_tol = rel_tol;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn measurement_dim(&self) -> usize {
        self.m
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tol
    }

    pub fn base(&self) -> &ModelMatrices {
        &self.base
    }

    pub fn overrides(&self) -> &[ModelOverride] {
        &self.overrides
    }

    /// `F_k`.
    pub fn transition(&self, k: Step) -> &DMatrix<f64> {
        self.lookup(k, |o| o.f.as_ref()).unwrap_or(&self.base.f)
    }

    /// `H_k`.
    pub fn observation(&self, k: Step) -> &DMatrix<f64> {
        self.lookup(k, |o| o.h.as_ref()).unwrap_or(&self.base.h)
    }

    /// `Q_k`.
    pub fn process_noise(&self, k: Step) -> &DMatrix<f64> {
        self.lookup(k, |o| o.q.as_ref()).unwrap_or(&self.base.q)
    }

    /// `R_k`.
    pub fn measurement_noise(&self, k: Step) -> &DMatrix<f64> {
        self.lookup(k, |o| o.r.as_ref()).unwrap_or(&self.base.r)
    }

    /// Classification of `Q_k`, with `Q_k⁻¹` when it exists.
    pub(crate) fn process_noise_structure(&self, k: Step) -> &ProcessNoise {
        self.factor_lookup(k, |f| f.q.as_ref())
            .unwrap_or_else(|| self.base_factors.q.as_ref().expect("base Q"))
    }

    /// `R_k⁻¹`, or `None` when `R_k` is singular.
    pub(crate) fn measurement_noise_inverse(&self, k: Step) -> Option<&DMatrix<f64>> {
        self.factor_lookup(k, |f| f.r_inv.as_ref())
            .unwrap_or_else(|| self.base_factors.r_inv.as_ref().expect("base R"))
            .as_ref()
    }

    /// The later an override appears in the table, the higher its precedence.
    fn lookup<'a>(
        &'a self,
        k: Step,
        field: impl Fn(&'a ModelOverride) -> Option<&'a DMatrix<f64>>,
    ) -> Option<&'a DMatrix<f64>> {
        self.overrides
            .iter()
            .rev()
            .filter(|o| o.covers(k))
            .find_map(field)
    }

    fn factor_lookup<'a, T>(
        &'a self,
        k: Step,
        field: impl Fn(&'a NoiseFactors) -> Option<&'a T>,
    ) -> Option<&'a T> {
        self.overrides
            .iter()
            .zip(&self.override_factors)
            .rev()
            .filter(|(o, _)| o.covers(k))
            .find_map(|(_, f)| field(f))
    }

    /// Rebuilds the model with every matrix passed through the given maps.
    /// Validation is re-run with `check`.
    pub(crate) fn map_matrices(
        &self,
        check: NoiseCheck,
        map_q: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
        map_r: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
        extra: Vec<ModelOverride>,
    ) -> Result<Self> {
        let base = ModelMatrices {
            f: self.base.f.clone(),
            h: self.base.h.clone(),
            q: map_q(&self.base.q),
            r: map_r(&self.base.r),
        };
        let mut overrides: Vec<ModelOverride> = self
            .overrides
            .iter()
            .map(|o| ModelOverride {
                from: o.from,
                to: o.to,
                f: o.f.clone(),
                h: o.h.clone(),
                q: o.q.as_ref().map(&map_q),
                r: o.r.as_ref().map(&map_r),
            })
            .collect();
        overrides.extend(extra);
        Ok(Self::with_noise_check(base, overrides, check)?.with_rank_tolerance(self.rank_tol))
    }

    /// Parses the JSON model-definition document.
    ///
    /// `R` is only required to be positive semidefinite here, so that
    /// noise-free truth models can be described.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Model(format!("invalid model JSON: {e}")))?;
        file.into_model()
    }
}

fn check_shape(name: &str, a: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if a.nrows() != rows || a.ncols() != cols {
        return Err(Error::Model(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn check_process_noise(q: &DMatrix<f64>) -> Result<()> {
    if !linalg::is_symmetric(q, SYMMETRY_TOL) {
        return Err(Error::Model("Q is not symmetric".into()));
    }
    let lo = linalg::min_eigenvalue(q);
    if lo < PSD_EIG_FLOOR {
        return Err(Error::Model(format!("Q has negative eigenvalue {lo:e}")));
    }
    Ok(())
}

fn check_measurement_noise(r: &DMatrix<f64>, check: NoiseCheck) -> Result<()> {
    if !linalg::is_symmetric(r, SYMMETRY_TOL) {
        return Err(Error::Model("R is not symmetric".into()));
    }
    let lo = linalg::min_eigenvalue(r);
    match check {
        NoiseCheck::Strict if lo <= PD_EIG_FLOOR => Err(Error::Model(format!(
            "R is not positive definite (smallest eigenvalue {lo:e})"
        ))),
        NoiseCheck::AllowSingularR if lo < PSD_EIG_FLOOR => {
            Err(Error::Model(format!("R has negative eigenvalue {lo:e}")))
        }
        _ => Ok(()),
    }
}

/// Covariance-form estimate `(x̂_k, P_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub index: Step,
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
}

/// Information-form estimate `(ẑ_k, Z_k)` with `Z = P⁻¹`, `ẑ = P⁻¹x̂`.
///
/// `Z` may be singular, in particular the zero matrix (no information).
#[derive(Debug, Clone, PartialEq)]
pub struct InfoEstimate {
    pub index: Step,
    pub z_hat: DVector<f64>,
    pub z: DMatrix<f64>,
}

impl InfoEstimate {
    /// Total ignorance about the state at `index`.
    pub fn zero(index: Step, n: usize) -> Self {
        InfoEstimate {
            index,
            z_hat: DVector::zeros(n),
            z: DMatrix::zeros(n, n),
        }
    }
}

/// Unbiased FIR estimate `(x̂_k, G_k)`. `G` takes the place of `P` but carries
/// no noise statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct UfirEstimate {
    pub index: Step,
    pub x_hat: DVector<f64>,
    pub g: DMatrix<f64>,
}

/// Per-step byproducts of a correction: gain and innovation `y_k − H_k x̂_{k|k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub index: Step,
    pub gain: DMatrix<f64>,
    pub innovation: DVector<f64>,
}

/// Contiguous run of measurements `y_start, y_start+1, …`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementWindow {
    pub start: Step,
    pub measurements: Vec<DVector<f64>>,
}

impl MeasurementWindow {
    pub fn new(start: Step, measurements: Vec<DVector<f64>>) -> Self {
        MeasurementWindow {
            start,
            measurements,
        }
    }

    /// Window of scalar measurements.
    pub fn scalar(start: Step, values: &[f64]) -> Self {
        Self::new(
            start,
            values
                .iter()
                .map(|&v| DVector::from_element(1, v))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Index of the last measurement. Meaningless on an empty window.
    pub fn end(&self) -> Step {
        self.start + self.len() as Step - 1
    }

    pub fn get(&self, k: Step) -> Option<&DVector<f64>> {
        usize::try_from(k - self.start)
            .ok()
            .and_then(|i| self.measurements.get(i))
    }

    /// `(k, y_k)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (Step, &DVector<f64>)> + '_ {
        self.measurements
            .iter()
            .enumerate()
            .map(move |(i, y)| (self.start + i as Step, y))
    }

    /// The `len` measurements ending at `end`, or `None` if they are not all
    /// inside this window.
    pub fn ending_at(&self, end: Step, len: usize) -> Option<MeasurementWindow> {
        let first = end - len as Step + 1;
        let lo = usize::try_from(first - self.start).ok()?;
        let hi = lo + len;
        if len == 0 || hi > self.len() {
            return None;
        }
        Some(MeasurementWindow::new(
            first,
            self.measurements[lo..hi].to_vec(),
        ))
    }

    /// The first `len` measurements.
    pub fn head(&self, len: usize) -> MeasurementWindow {
        MeasurementWindow::new(
            self.start,
            self.measurements[..len.min(self.len())].to_vec(),
        )
    }

    /// Everything after the first `skip` measurements.
    pub fn tail(&self, skip: usize) -> MeasurementWindow {
        let skip = skip.min(self.len());
        MeasurementWindow::new(
            self.start + skip as Step,
            self.measurements[skip..].to_vec(),
        )
    }

    /// All measurements stacked into one `(len·m)`-vector.
    pub fn stacked(&self) -> DVector<f64> {
        let total: usize = self.measurements.iter().map(|y| y.len()).sum();
        DVector::from_iterator(
            total,
            self.measurements.iter().flat_map(|y| y.iter().copied()),
        )
    }
}

impl MeasurementWindow {
    /// Borrowed view of the whole window.
    pub fn view(&self) -> WindowView<'_> {
        WindowView {
            start: self.start,
            measurements: &self.measurements,
        }
    }

    /// Borrowed counterpart of [`MeasurementWindow::ending_at`].
    pub fn view_ending_at(&self, end: Step, len: usize) -> Option<WindowView<'_>> {
        let first = end - len as Step + 1;
        let lo = usize::try_from(first - self.start).ok()?;
        let hi = lo + len;
        if len == 0 || hi > self.len() {
            return None;
        }
        Some(WindowView {
            start: first,
            measurements: &self.measurements[lo..hi],
        })
    }
}

/// Borrowed run of consecutive measurements, so that sliding windows over a
/// long stream need not copy it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowView<'a> {
    pub start: Step,
    pub measurements: &'a [DVector<f64>],
}

impl<'a> From<&'a MeasurementWindow> for WindowView<'a> {
    fn from(w: &'a MeasurementWindow) -> Self {
        w.view()
    }
}

impl<'a, 'b> From<&'b WindowView<'a>> for WindowView<'a> {
    fn from(w: &'b WindowView<'a>) -> Self {
        *w
    }
}

impl<'a> WindowView<'a> {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Index of the last measurement. Meaningless on an empty view.
    pub fn end(&self) -> Step {
        self.start + self.len() as Step - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (Step, &'a DVector<f64>)> + 'a {
        let start = self.start;
        self.measurements
            .iter()
            .enumerate()
            .map(move |(i, y)| (start + i as Step, y))
    }

    /// The first `len` measurements.
    pub fn head(&self, len: usize) -> WindowView<'a> {
        WindowView {
            start: self.start,
            measurements: &self.measurements[..len.min(self.len())],
        }
    }

    /// Everything after the first `skip` measurements.
    pub fn tail(&self, skip: usize) -> WindowView<'a> {
        let skip = skip.min(self.len());
        WindowView {
            start: self.start + skip as Step,
            measurements: &self.measurements[skip..],
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let total: usize = self.measurements.iter().map(|y| y.len()).sum();
        DVector::from_iterator(
            total,
            self.measurements.iter().flat_map(|y| y.iter().copied()),
        )
    }

    pub fn to_window(&self) -> MeasurementWindow {
        MeasurementWindow::new(self.start, self.measurements.to_vec())
    }
}

/// `Φ(l, s) = F_l F_{l−1} ⋯ F_{s+1}`, the identity when `l = s`.
pub fn transition_product(model: &ModelSequence, s: Step, l: Step) -> Result<DMatrix<f64>> {
    if l < s {
        return Err(Error::InvalidArgument(format!(
            "transition product needs l >= s, got s={s}, l={l}"
        )));
    }
    let mut phi = DMatrix::identity(model.state_dim(), model.state_dim());
    for k in (s + 1)..=l {
        phi = model.transition(k) * phi;
    }
    Ok(phi)
}

/// Stacked observation matrix whose block-row `i` is `H_{s+i} Φ(s+i, s)`.
pub fn stacked_observation(model: &ModelSequence, s: Step, len: usize) -> Result<DMatrix<f64>> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "stacked observation needs at least one block".into(),
        ));
    }
    let (n, m) = (model.state_dim(), model.measurement_dim());
    let mut c = DMatrix::zeros(len * m, n);
    let mut phi = DMatrix::identity(n, n);
    for i in 0..len {
        let k = s + i as Step;
        if i > 0 {
            phi = model.transition(k) * phi;
        }
        c.view_mut((i * m, 0), (m, n))
            .copy_from(&(model.observation(k) * &phi));
    }
    Ok(c)
}

/// True iff `c` has full column rank `n` under the default rank tolerance.
pub fn window_observable(c: &DMatrix<f64>, n: usize) -> bool {
    window_observable_with_tol(c, n, DEFAULT_RANK_TOL)
}

pub fn window_observable_with_tol(c: &DMatrix<f64>, n: usize, rel_tol: f64) -> bool {
    c.ncols() == n && linalg::numerical_rank(c, rel_tol) == n
}

/// Default initialization length for a window starting at `start` with
/// `horizon` measurements: `n` when the first `n` measurements are observable,
/// otherwise the smallest observable length not exceeding the horizon.
pub fn default_init_length(model: &ModelSequence, start: Step, horizon: usize) -> Result<usize> {
    let n = model.state_dim();
    let observable = |len: usize| -> Result<bool> {
        let c = stacked_observation(model, start, len)?;
        Ok(window_observable_with_tol(&c, n, model.rank_tolerance()))
    };
    if n <= horizon && observable(n)? {
        return Ok(n);
    }
    for len in (1..=horizon).filter(|&l| l != n) {
        if observable(len)? {
            return Ok(len);
        }
    }
    Err(Error::NotObservable {
        step: start + horizon as Step - 1,
        detail: format!("no observable initialization segment within a horizon of {horizon}"),
    })
}

/// JSON model-definition document.
///
/// ```json
/// {
///   "n": 2, "m": 1,
///   "F": [[1, 1], [0, 1]],
///   "H": [[1, 0]],
///   "Q": [[0, 0], [0, 1e-4]],
///   "R": [[1]],
///   "overrides": [ { "from": 100, "to": 120, "F": [[1, 1.2], [0, 1]] } ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideFile {
    pub from: Step,
    pub to: Step,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Vec<f64>>>,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
}

/// Converts nested rows into a matrix with the expected shape.
pub fn matrix_from_rows(
    name: &str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Model(format!("{name} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn into_model(self) -> Result<ModelSequence> {
        let (n, m) = (self.n, self.m);
        let base = ModelMatrices {
            f: matrix_from_rows("F", &self.f, n, n)?,
            h: matrix_from_rows("H", &self.h, m, n)?,
            q: matrix_from_rows("Q", &self.q, n, n)?,
            r: matrix_from_rows("R", &self.r, m, m)?,
        };
        let conv = |name, a: &Option<Vec<Vec<f64>>>, r, c| {
            a.as_ref()
                .map(|rows| matrix_from_rows(name, rows, r, c))
                .transpose()
        };
        let overrides = self
            .overrides
            .iter()
            .map(|o| {
                Ok(ModelOverride {
                    from: o.from,
                    to: o.to,
                    f: conv("F", &o.f, n, n)?,
                    h: conv("H", &o.h, m, n)?,
                    q: conv("Q", &o.q, n, n)?,
                    r: conv("R", &o.r, m, m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ModelSequence::with_noise_check(base, overrides, NoiseCheck::AllowSingularR)
    }

    pub fn from_model(model: &ModelSequence) -> Self {
        let b = model.base();
        ModelFile {
            n: model.state_dim(),
            m: model.measurement_dim(),
            f: matrix_to_rows(&b.f),
            h: matrix_to_rows(&b.h),
            q: matrix_to_rows(&b.q),
            r: matrix_to_rows(&b.r),
            overrides: model
                .overrides()
                .iter()
                .map(|o| OverrideFile {
                    from: o.from,
                    to: o.to,
                    f: o.f.as_ref().map(matrix_to_rows),
                    h: o.h.as_ref().map(matrix_to_rows),
                    q: o.q.as_ref().map(matrix_to_rows),
                    r: o.r.as_ref().map(matrix_to_rows),
                })
                .collect(),
        }
    }
}
