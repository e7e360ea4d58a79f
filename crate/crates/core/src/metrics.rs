//! Empirical norms, Gram-matrix diagnostics, and the Monte-Carlo MISE
//! harness.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisFamily, BasisPlan, BasisSpec, DimensionGrid, Interval};
use crate::baseline::{KernelSpec, NwEstimator, NwMode};
use crate::error::{Error, Result};
use crate::regression::{build_response, fit_grid, LevelRule, RidgeFit};
use crate::sde::{builtin_model, derive_seed, simulate_sample, ModelId, PathSample};
use crate::selection::{argmin, choose, PenaltySpec};

/// Gram matrices with a smallest eigenvalue at or below this are singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-14;

/// `(1/(N n)) Σ_j Σ_{k<n} h(X^j_k)²`.
pub fn empirical_sq_norm<F: Fn(f64) -> f64>(h: F, sample: &PathSample) -> f64 {
    let total: f64 = sample.design_points().map(|x| h(x).powi(2)).sum();
    total / sample.num_design_points() as f64
}

/// `‖h − g‖²_{n,N}`.
pub fn empirical_sq_distance<F, G>(h: F, g: G, sample: &PathSample) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    empirical_sq_norm(|x| h(x) - g(x), sample)
}

/// `Ψ̂ = (1/(N n)) Fᵀ F`.
pub fn gram_matrix(spec: &BasisSpec, sample: &PathSample) -> DMatrix<f64> {
    let m = spec.dim();
    let mut g = DMatrix::zeros(m, m);
    let mut row = vec![0.0; m];
    for x in sample.design_points() {
        spec.eval_into(x, &mut row);
        for i in 0..m {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..m {
                g[(i, j)] += row[i] * row[j];
            }
        }
    }
    let scale = sample.num_design_points() as f64;
    for i in 0..m {
        for j in i..m {
            let v = g[(i, j)] / scale;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `sup_x Σ_ℓ φ_ℓ(x)²` over `10·m + 1` equally spaced points. The real line is
/// scanned on `[-r, r]` with `r = √(2m + 1) + 3`, past which Hermite
/// functions are negligible.
pub fn sup_sq_sum(spec: &BasisSpec) -> f64 {
    let m = spec.dim();
    let (a, b) = match spec.interval().bounds() {
        Some(ab) => ab,
        None => {
            let r = ((2 * m + 1) as f64).sqrt() + 3.0;
            (-r, r)
        }
    };
    let points = 10 * m;
    let mut row = vec![0.0; m];
    (0..=points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / points as f64;
            spec.eval_into(x, &mut row);
            row.iter().map(|v| v * v).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramDiagnostics {
    pub m: usize,
    pub min_eigenvalue: f64,
    /// `1 / min_eigenvalue`; infinite when singular.
    pub op_norm_inverse: f64,
    pub singular: bool,
    #[serde(rename = "L_of_m")]
    pub l_of_m: f64,
    /// `L(m) · max(‖Ψ̂⁻¹‖_op, 1)`.
    pub condition_lhs: f64,
    /// `N / log² N`.
    pub condition_bound: f64,
    pub satisfied: bool,
}

pub fn diagnostics_from_gram(gram: &DMatrix<f64>, l_of_m: f64, num_paths: usize) -> GramDiagnostics {
    let eig = SymmetricEigen::new(gram.clone());
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let singular = min_eigenvalue <= SINGULAR_EIGENVALUE;
    let op_norm_inverse = if singular { f64::INFINITY } else { 1.0 / min_eigenvalue };
    let condition_lhs = l_of_m * op_norm_inverse.max(1.0);
    let log_n = (num_paths as f64).ln();
    let condition_bound = num_paths as f64 / (log_n * log_n);
    GramDiagnostics {
        m: gram.nrows(),
        min_eigenvalue,
        op_norm_inverse,
        singular,
        l_of_m,
        condition_lhs,
        condition_bound,
        satisfied: condition_lhs <= condition_bound,
    }
}

pub fn gram_diagnostics(spec: &BasisSpec, sample: &PathSample) -> GramDiagnostics {
    diagnostics_from_gram(&gram_matrix(spec, sample), sup_sq_sum(spec), sample.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Penalized choice over the grid.
    Adaptive,
    /// Best grid value measured against the truth.
    Oracle,
    /// One grid value.
    Fixed(usize),
    /// Kernel baseline on the first training path.
    NadarayaWatson(NwMode),
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Adaptive => f.write_str("adaptive"),
            EstimatorKind::Oracle => f.write_str("oracle"),
            EstimatorKind::Fixed(k) => write!(f, "fixed_{k}"),
            EstimatorKind::NadarayaWatson(mode) => write!(f, "nw_{}", mode.as_str()),
        }
    }
}

/// One table cell: a model, a basis, a sample size, and the estimators to score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub model: ModelId,
    pub plan: BasisPlan,
    /// The target is `σ² · 1_I` for this interval.
    pub truth_interval: Interval,
    pub grid: DimensionGrid,
    pub penalty: PenaltySpec,
    pub level: LevelRule,
    pub num_paths: usize,
    pub n: usize,
    pub eval_paths: usize,
    pub reps: usize,
    pub seed: u64,
    pub substeps: usize,
    pub estimators: Vec<EstimatorKind>,
}

impl CellConfig {
    fn sample_seed(&self, rep: usize, role: u64) -> u64 {
        derive_seed(
            self.seed,
            &[self.model.seed_tag(), self.num_paths as u64, self.n as u64, rep as u64, role],
        )
    }

    /// Training and evaluation samples of one repetition. They depend on the
    /// model, `N`, `n`, the repetition and the master seed only, so cells that
    /// differ in basis or interval see the same data.
    pub fn samples(&self, rep: usize) -> Result<(PathSample, PathSample)> {
        let model = builtin_model(self.model);
        let train = simulate_sample(&model, self.num_paths, self.n, self.substeps, self.sample_seed(rep, 0))?;
        let eval = simulate_sample(&model, self.eval_paths, self.n, self.substeps, self.sample_seed(rep, 1))?;
        Ok((train, eval))
    }

    pub fn truth(&self) -> impl Fn(f64) -> f64 + Sync + '_ {
        let model = builtin_model(self.model);
        let interval = self.truth_interval;
        move |x| model.sigma_sq(x) * interval.indicator(x)
    }
}

/// Everything computed in one repetition.
#[derive(Clone, Debug)]
pub struct RepOutcome {
    pub fits: Vec<RidgeFit>,
    /// Held-out loss of each fit (truncated), in grid order.
    pub fit_losses: Vec<f64>,
    /// One loss per configured estimator.
    pub losses: Vec<f64>,
    /// Grid value used by each estimator (`None` for the kernel baseline).
    pub sizes: Vec<Option<usize>>,
}

pub fn rep_outcome(cfg: &CellConfig, rep: usize) -> Result<RepOutcome> {
    let (train, eval) = cfg.samples(rep)?;
    let truth = cfg.truth();
    let needs_fits = cfg
        .estimators
        .iter()
        .any(|e| !matches!(e, EstimatorKind::NadarayaWatson(_)));
    let (fits, fit_losses) = if needs_fits {
        let level = cfg.level.resolve(cfg.num_paths, cfg.n)?;
        let u = build_response(&train);
        let fits = fit_grid(&cfg.plan, &cfg.grid, &train, &u, level)?;
        let losses: Vec<f64> = fits
            .iter()
            .map(|f| {
                let est = f.estimator();
                empirical_sq_distance(|x| est.eval(x), &truth, &eval)
            })
            .collect();
        (fits, losses)
    } else {
        (Vec::new(), Vec::new())
    };

    let nw_losses = if cfg.estimators.iter().any(|e| matches!(e, EstimatorKind::NadarayaWatson(_))) {
        Some(nw_pair_losses(&train, &eval, &truth)?)
    } else {
        None
    };

    let mut losses = Vec::with_capacity(cfg.estimators.len());
    let mut sizes = Vec::with_capacity(cfg.estimators.len());
    for kind in &cfg.estimators {
        let (loss, size) = match *kind {
            EstimatorKind::Adaptive => {
                let (idx, _) = choose(&fits, &cfg.penalty, cfg.num_paths, cfg.n)?;
                (fit_losses[idx], Some(cfg.grid.values()[idx]))
            }
            EstimatorKind::Oracle => {
                let idx = argmin(&fit_losses).ok_or_else(|| Error::InvalidParameter("empty dimension grid".into()))?;
                (fit_losses[idx], Some(cfg.grid.values()[idx]))
            }
            EstimatorKind::Fixed(size) => {
                let idx = cfg.grid.values().iter().position(|&k| k == size).ok_or_else(|| {
                    Error::InvalidParameter(format!("fixed size {size} is not in the dimension grid"))
                })?;
                (fit_losses[idx], Some(size))
            }
            EstimatorKind::NadarayaWatson(mode) => {
                let (literal, corrected) = nw_losses.expect("computed above");
                match mode {
                    NwMode::Literal => (literal, None),
                    NwMode::Corrected => (corrected, None),
                }
            }
        };
        losses.push(loss);
        sizes.push(size);
    }
    Ok(RepOutcome {
        fits,
        fit_losses,
        losses,
        sizes,
    })
}

/// Held-out losses of the literal and corrected kernel estimators built on
/// the single training path.
fn nw_pair_losses<F: Fn(f64) -> f64>(train: &PathSample, eval: &PathSample, truth: F) -> Result<(f64, f64)> {
    if train.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "the kernel baseline uses a single path (got N = {})",
            train.len()
        )));
    }
    let nw = NwEstimator::new(&train.paths()[0], &KernelSpec::default(), NwMode::Literal)?;
    let (mut literal, mut corrected) = (0.0, 0.0);
    for x in eval.design_points() {
        let (l, c) = nw.eval_pair(x);
        let t = truth(x);
        literal += (l.value - t).powi(2);
        corrected += (c.value - t).powi(2);
    }
    let count = eval.num_design_points() as f64;
    Ok((literal / count, corrected / count))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiseReport {
    pub model: ModelId,
    pub interval: String,
    pub estimator: EstimatorKind,
    pub num_paths: usize,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation; `0` when `reps = 1`.
    pub sd: f64,
    pub per_rep: Vec<f64>,
    pub sizes: Vec<Option<usize>>,
}

impl MiseReport {
    pub fn from_losses(
        cfg: &CellConfig,
        interval: impl Into<String>,
        estimator: EstimatorKind,
        per_rep: Vec<f64>,
        sizes: Vec<Option<usize>>,
    ) -> Self {
        let (mean, sd) = mean_sd(&per_rep);
        MiseReport {
            model: cfg.model,
            interval: interval.into(),
            estimator,
            num_paths: cfg.num_paths,
            n: cfg.n,
            reps: per_rep.len(),
            mean,
            sd,
            per_rep,
            sizes,
        }
    }

    /// Set when the standard deviation is undefined (one repetition).
    pub fn sd_flag(&self) -> &'static str {
        if self.reps < 2 {
            "single_rep"
        } else {
            ""
        }
    }

    pub fn csv_header() -> &'static str {
        "model,interval,estimator,N,n,mean,sd,flag"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.interval,
            self.estimator,
            self.num_paths,
            self.n,
            self.mean,
            self.sd,
            self.sd_flag()
        )
    }

    pub fn write_raw<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (rep, (loss, size)) in self.per_rep.iter().zip(&self.sizes).enumerate() {
            let size = size.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.model, self.interval, self.estimator, self.num_paths, self.n, rep, loss, size
            )?;
        }
        Ok(())
    }
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every repetition of a cell and returns one report per estimator.
pub fn run_cell(cfg: &CellConfig, interval_label: &str) -> Result<Vec<MiseReport>> {
    if cfg.reps == 0 || cfg.estimators.is_empty() {
        return Err(Error::InvalidParameter(
            "a cell needs at least one repetition and one estimator".into(),
        ));
    }
    let outcomes: Vec<(Vec<f64>, Vec<Option<usize>>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            rep_outcome(cfg, rep)
                .map(|o| (o.losses, o.sizes))
                .map_err(|e| Error::at_repetition(rep, e))
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let losses = outcomes.iter().map(|o| o.0[i]).collect();
            let sizes = outcomes.iter().map(|o| o.1[i]).collect();
            MiseReport::from_losses(cfg, interval_label, kind, losses, sizes)
        })
        .collect())
}

/// Report for the first configured estimator.
pub fn mise_experiment(cfg: &CellConfig) -> Result<MiseReport> {
    let label = cfg.plan.interval.to_string();
    Ok(run_cell(cfg, &label)?.swap_remove(0))
}

/// Size of a fit on its grid (`K` for splines, `m` otherwise).
pub fn grid_value(fit: &RidgeFit) -> usize {
    match fit.basis.family() {
        BasisFamily::Bspline { segments, .. } => segments,
        other => other.dim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::DiffusionPath;
    use approx::assert_abs_diff_eq;

    fn sample(values: &[&[f64]]) -> PathSample {
        PathSample::new(values.iter().map(|v| DiffusionPath::new(v.to_vec()).unwrap()).collect(), 0).unwrap()
    }

    #[test]
    fn norms() {
        let s = sample(&[&[0.1, 0.4, -0.3], &[1.0, 2.0, 5.0]]);
        assert_eq!(empirical_sq_norm(|_| 0.0, &s), 0.0);
        assert_abs_diff_eq!(empirical_sq_norm(|_| 3.0, &s), 9.0, epsilon = 1e-14);
        let direct = (0.01 + 0.16 + 1.0 + 4.0) / 4.0;
        assert_abs_diff_eq!(empirical_sq_norm(|x| x, &s), direct, epsilon = 1e-14);
    }

    #[test]
    fn gram_of_one_point() {
        let s = sample(&[&[0.3, 0.9]]);
        let spec = BasisSpec::bspline(-1.0, 1.0, 2, 2).unwrap();
        let g = gram_matrix(&spec, &s);
        let phi = spec.eval(0.3);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(g[(i, j)], phi[i] * phi[j], epsilon = 1e-15);
                assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
    }

    #[test]
    fn identity_gram_diagnostics() {
        let d = diagnostics_from_gram(&DMatrix::identity(3, 3), 1.0, 100);
        assert_abs_diff_eq!(d.op_norm_inverse, 1.0, epsilon = 1e-14);
        assert!(!d.singular);
        let z = diagnostics_from_gram(&DMatrix::zeros(2, 2), 1.0, 100);
        assert!(z.singular);
        assert!(z.op_norm_inverse.is_infinite());
        assert!(!z.satisfied);
    }

    #[test]
    fn spline_sup_sum_at_most_one() {
        for (k, m) in [(1, 1), (4, 3), (16, 2), (32, 3)] {
            let spec = BasisSpec::bspline(-2.0, 3.0, k, m).unwrap();
            assert!(sup_sq_sum(&spec) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn mean_sd_conventions() {
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(m, 2.0);
        assert_abs_diff_eq!(s, 1.0);
    }
}
