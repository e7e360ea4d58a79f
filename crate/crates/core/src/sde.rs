//! Diffusion models and their Euler–Maruyama discretization on `[0, 1]`.
//!
//! Every path draws its Gaussian increments from its own ChaCha stream whose
//! key is derived from the sample's master seed and the path index, so path
//! `j` of a sample is the same whether or not the other paths are generated,
//! and in whatever order they are generated.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refinement used between two observation times unless told otherwise.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Closed-form coefficient shapes used by the built-in models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `1 − x`
    MeanReverting,
    /// `1 − x²`
    InvertedParabola,
    /// `1/(3 + sin(2πx)) + cos²(πx/2)`
    Multimodal,
    /// `0.1 + 0.9/√(1 + x²)`
    Decaying,
    /// `1/3 + sin²(2πx)/π + 1/(π + x²)`
    Oscillating,
}

impl Formula {
    fn eval(self, x: f64) -> f64 {
        match self {
            Formula::MeanReverting => 1.0 - x,
            Formula::InvertedParabola => 1.0 - x * x,
            Formula::Multimodal => {
                let c = (PI * x / 2.0).cos();
                1.0 / (3.0 + (2.0 * PI * x).sin()) + c * c
            }
            Formula::Decaying => 0.1 + 0.9 / (1.0 + x * x).sqrt(),
            Formula::Oscillating => {
                let s = (2.0 * PI * x).sin();
                1.0 / 3.0 + s * s / PI + 1.0 / (PI + x * x)
            }
        }
    }
}

/// A drift or diffusion coefficient `x ↦ f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientFn {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    Builtin { formula: Formula },
    /// Piecewise-linear interpolation through `(grid[i], values[i])`, held
    /// constant beyond the first and last node.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl CoefficientFn {
    pub fn constant(value: f64) -> Self {
        CoefficientFn::Constant { value }
    }

    pub fn builtin(formula: Formula) -> Self {
        CoefficientFn::Builtin { formula }
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "tabulated coefficient needs matching non-empty grid and values (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated coefficient contains a non-finite entry".into(),
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        Ok(CoefficientFn::Tabulated { grid, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CoefficientFn::Constant { value } => *value,
            CoefficientFn::Affine { intercept, slope } => intercept + slope * x,
            CoefficientFn::Builtin { formula } => formula.eval(x),
            CoefficientFn::Tabulated { grid, values } => interpolate(grid, values, x),
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[last] {
        return values[last];
    }
    // first node strictly greater than x; 1 <= hi <= last here
    let hi = grid.partition_point(|&g| g <= x);
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

/// The built-in models: the three study models and the three models used to
/// calibrate the penalty constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    C1,
    C2,
    C3,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::C1,
        ModelId::C2,
        ModelId::C3,
    ];
    pub const STUDY: [ModelId; 3] = [ModelId::M1, ModelId::M2, ModelId::M3];
    pub const CALIBRATION: [ModelId; 3] = [ModelId::C1, ModelId::C2, ModelId::C3];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::C1 => "C1",
            ModelId::C2 => "C2",
            ModelId::C3 => "C3",
        }
    }

    fn index(self) -> u64 {
        ModelId::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    /// Stable tag used when deriving per-model seeds.
    pub fn seed_tag(self) -> u64 {
        self.index() + 1
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" | "1" => Ok(ModelId::M1),
            "M2" | "2" => Ok(ModelId::M2),
            "M3" | "3" => Ok(ModelId::M3),
            "C1" => Ok(ModelId::C1),
            "C2" => Ok(ModelId::C2),
            "C3" => Ok(ModelId::C3),
            _ => Err(Error::InvalidParameter(format!("unknown model id `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub drift: CoefficientFn,
    pub diffusion: CoefficientFn,
    pub x0: f64,
    pub label: String,
    /// `(σ₀, σ₁)` when the diffusion is known to stay in `[σ₀, σ₁]` with `σ₀ > 0`.
    pub sigma_bounds: Option<(f64, f64)>,
}

impl ModelSpec {
    pub fn new(drift: CoefficientFn, diffusion: CoefficientFn, x0: f64, label: impl Into<String>) -> Self {
        ModelSpec {
            drift,
            diffusion,
            x0,
            label: label.into(),
            sigma_bounds: None,
        }
    }

    pub fn with_sigma_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.sigma_bounds = Some((lower, upper));
        self
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.drift.eval(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        self.diffusion.eval(x)
    }

    /// The estimation target `σ²(x)`.
    pub fn sigma_sq(&self, x: f64) -> f64 {
        let s = self.diffusion.eval(x);
        s * s
    }

    /// Diffusion value, checked against the declared bounds when there are any.
    pub fn diffusion_checked(&self, x: f64) -> Result<f64> {
        let value = self.diffusion.eval(x);
        match self.sigma_bounds {
            Some((lower, upper)) if !(lower..=upper).contains(&value) => {
                Err(Error::EllipticityViolated {
                    x,
                    value,
                    lower,
                    upper,
                })
            }
            _ => Ok(value),
        }
    }
}

pub fn builtin_model(id: ModelId) -> ModelSpec {
    let drift = CoefficientFn::builtin(Formula::MeanReverting);
    match id {
        ModelId::M1 => ModelSpec::new(drift, CoefficientFn::constant(1.0), 0.0, "Model 1 (Ornstein-Uhlenbeck)")
            .with_sigma_bounds(1.0, 1.0),
        // σ vanishes at ±1 and is unbounded: no bounds declared.
        ModelId::M2 => ModelSpec::new(drift, CoefficientFn::builtin(Formula::InvertedParabola), 0.0, "Model 2"),
        ModelId::M3 => ModelSpec::new(drift, CoefficientFn::builtin(Formula::Multimodal), 0.0, "Model 3")
            .with_sigma_bounds(0.25, 1.5),
        ModelId::C1 => ModelSpec::new(drift, CoefficientFn::constant(1.0), 0.0, "Calibration model 1")
            .with_sigma_bounds(1.0, 1.0),
        ModelId::C2 => ModelSpec::new(drift, CoefficientFn::builtin(Formula::Decaying), 0.0, "Calibration model 2")
            .with_sigma_bounds(0.1, 1.0),
        ModelId::C3 => ModelSpec::new(drift, CoefficientFn::builtin(Formula::Oscillating), 0.0, "Calibration model 3")
            .with_sigma_bounds(1.0 / 3.0, 1.0 / 3.0 + 2.0 / PI),
    }
}

/// One trajectory observed at `t_k = k/n`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionPath {
    values: Vec<f64>,
}

impl DiffusionPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "a path needs at least two observations".into(),
            ));
        }
        Ok(DiffusionPath { values })
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `N` independent paths sharing the same number of steps.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    paths: Vec<DiffusionPath>,
    seed: u64,
}

impl PathSample {
    pub fn new(paths: Vec<DiffusionPath>, seed: u64) -> Result<Self> {
        let Some(first) = paths.first() else {
            return Err(Error::InvalidParameter("a sample needs at least one path".into()));
        };
        let n = first.n();
        if let Some(bad) = paths.iter().find(|p| p.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.n(),
            });
        }
        Ok(PathSample { paths, seed })
    }

    pub fn paths(&self) -> &[DiffusionPath] {
        &self.paths
    }

    /// Number of paths `N`.
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Steps per path `n`.
    pub fn n(&self) -> usize {
        self.paths[0].n()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Observation points `X^j_{kΔ}` for `k = 0..n` (terminal values excluded),
    /// path-major.
    pub fn design_points(&self) -> impl Iterator<Item = f64> + '_ {
        self.paths
            .iter()
            .flat_map(|p| p.values[..p.values.len() - 1].iter().copied())
    }

    pub fn num_design_points(&self) -> usize {
        self.len() * self.n()
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a sequence of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Seed of the sub-stream driving path `index` of a sample.
pub fn path_stream_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[0x5041_5448, index as u64])
}

fn simulate_values(model: &ModelSpec, n: usize, substeps: usize, stream_seed: u64) -> std::result::Result<Vec<f64>, usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let h = 1.0 / (n * substeps) as f64;
    let sqrt_h = h.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = model.x0;
    values.push(x);
    for k in 0..n {
        for s in 0..substeps {
            let z: f64 = rng.sample(StandardNormal);
            x += model.drift(x) * h + model.diffusion(x) * sqrt_h * z;
            if !x.is_finite() {
                return Err(k * substeps + s);
            }
        }
        values.push(x);
    }
    Ok(values)
}

/// Euler–Maruyama on a grid of `n · substeps` steps, kept every `substeps`.
pub fn simulate_path(model: &ModelSpec, n: usize, substeps: usize, stream_seed: u64) -> Result<DiffusionPath> {
    check_steps(n, substeps)?;
    simulate_values(model, n, substeps, stream_seed)
        .map(|values| DiffusionPath { values })
        .map_err(|step| Error::NonFiniteState { path: 0, step })
}

pub fn simulate_sample(
    model: &ModelSpec,
    num_paths: usize,
    n: usize,
    substeps: usize,
    master_seed: u64,
) -> Result<PathSample> {
    check_steps(n, substeps)?;
    if num_paths == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let paths = (0..num_paths)
        .into_par_iter()
        .map(|j| {
            simulate_values(model, n, substeps, path_stream_seed(master_seed, j))
                .map(|values| DiffusionPath { values })
                .map_err(|step| Error::NonFiniteState { path: j, step })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathSample {
        paths,
        seed: master_seed,
    })
}

fn check_steps(n: usize, substeps: usize) -> Result<()> {
    if n == 0 || substeps == 0 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 1 and substeps >= 1 (got n = {n}, substeps = {substeps})"
        )));
    }
    Ok(())
}
