//! Penalized choice of the dimension, the oracle dimension, and the grid
//! search for the penalty constant.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisPlan, DimensionGrid, Interval};
use crate::error::{Error, Result};
use crate::metrics::{empirical_sq_distance, grid_value, rep_outcome, CellConfig, EstimatorKind};
use crate::regression::{build_response, fit_grid, RidgeFit};
use crate::sde::{ModelId, PathSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `κ m log N / (N n)`
    MultiPath,
    /// `κ m log n / n`
    SinglePath,
    /// `κ m log² N / N²`
    Appendix,
}

impl PenaltyForm {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyForm::MultiPath => "multi",
            PenaltyForm::SinglePath => "single",
            PenaltyForm::Appendix => "appendix",
        }
    }
}

impl fmt::Display for PenaltyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kappa: f64,
    pub form: PenaltyForm,
}

impl PenaltySpec {
    pub fn new(kappa: f64, form: PenaltyForm) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be positive (got {kappa})")));
        }
        Ok(PenaltySpec { kappa, form })
    }

    /// `pen` for a space of dimension `m` (`K + M` for splines).
    pub fn value(&self, m: usize, num_paths: usize, n: usize) -> Result<f64> {
        let big = num_paths as f64;
        let small = n as f64;
        let rate = match self.form {
            PenaltyForm::MultiPath => big.ln() / (big * small),
            PenaltyForm::SinglePath => small.ln() / small,
            PenaltyForm::Appendix => big.ln().powi(2) / (big * big),
        };
        if !(rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{} penalty vanishes for N = {num_paths}, n = {n}",
                self.form
            )));
        }
        Ok(self.kappa * m as f64 * rate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    /// Grid value (`K` for splines).
    pub size: usize,
    pub m: usize,
    pub contrast: f64,
    pub penalty: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub chosen: usize,
    pub rows: Vec<SelectionRow>,
    pub fit: RidgeFit,
}

impl SelectionResult {
    /// Per-size table: `K,m,contrast,penalty,objective,chosen`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "K,m,contrast,penalty,objective,chosen")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.size,
                r.m,
                r.contrast,
                r.penalty,
                r.objective,
                u8::from(r.size == self.chosen)
            )?;
        }
        Ok(())
    }
}

/// Index of the smallest value; the first one wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= *v => {}
            _ if v.is_nan() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Penalized contrasts of already fitted models, in grid order.
pub fn penalized_rows(fits: &[RidgeFit], pen: &PenaltySpec, num_paths: usize, n: usize) -> Result<Vec<SelectionRow>> {
    fits.iter()
        .map(|fit| {
            let m = fit.dim();
            let contrast = fit.contrast();
            let penalty = pen.value(m, num_paths, n)?;
            Ok(SelectionRow {
                size: grid_value(fit),
                m,
                contrast,
                penalty,
                objective: contrast + penalty,
            })
        })
        .collect()
}

/// Index of the chosen fit among `fits`.
pub fn choose(fits: &[RidgeFit], pen: &PenaltySpec, num_paths: usize, n: usize) -> Result<(usize, Vec<SelectionRow>)> {
    let rows = penalized_rows(fits, pen, num_paths, n)?;
    let objectives: Vec<f64> = rows.iter().map(|r| r.objective).collect();
    let idx = argmin(&objectives).ok_or_else(|| Error::InvalidParameter("empty dimension grid".into()))?;
    Ok((idx, rows))
}

pub fn select_dimension(
    sample: &PathSample,
    grid: &DimensionGrid,
    plan: &BasisPlan,
    level: f64,
    pen: &PenaltySpec,
) -> Result<SelectionResult> {
    let u = build_response(sample);
    let fits = fit_grid(plan, grid, sample, &u, level)?;
    let (idx, rows) = choose(&fits, pen, sample.len(), sample.n())?;
    Ok(SelectionResult {
        chosen: rows[idx].size,
        rows,
        fit: fits.into_iter().nth(idx).expect("index from the same list"),
    })
}

/// The grid value whose truncated fit is closest to `truth` on `eval_sample`.
pub fn oracle_dimension<F>(
    sample: &PathSample,
    truth: F,
    eval_sample: &PathSample,
    grid: &DimensionGrid,
    plan: &BasisPlan,
    level: f64,
) -> Result<(usize, RidgeFit)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let u = build_response(sample);
    let fits = fit_grid(plan, grid, sample, &u, level)?;
    let losses: Vec<f64> = fits
        .iter()
        .map(|f| {
            let est = f.estimator();
            empirical_sq_distance(|x| est.eval(x), &truth, eval_sample)
        })
        .collect();
    let idx = argmin(&losses).ok_or_else(|| Error::InvalidParameter("empty dimension grid".into()))?;
    let fit = fits.into_iter().nth(idx).expect("index from the same list");
    Ok((grid.values()[idx], fit))
}

/// Default κ candidates.
pub const CALIBRATION_KAPPAS: [f64; 8] = [0.1, 0.5, 1.0, 2.0, 4.0, 5.0, 7.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub models: Vec<ModelId>,
    pub kappas: Vec<f64>,
    /// `(N, n)` pairs.
    pub scenarios: Vec<(usize, usize)>,
    pub eval_paths: usize,
    pub reps: usize,
    pub form: PenaltyForm,
    pub seed: u64,
    pub substeps: usize,
    pub grid: DimensionGrid,
    /// Fit on `[-√log N, √log N]` instead of `[-1, 1]`.
    pub appendix_interval: bool,
}

impl CalibrationConfig {
    /// Calibration models C1–C3 over the default scenarios and κ candidates.
    pub fn standard(reps: usize, seed: u64) -> Self {
        CalibrationConfig {
            models: ModelId::CALIBRATION.to_vec(),
            kappas: CALIBRATION_KAPPAS.to_vec(),
            scenarios: vec![(50, 100), (50, 250), (100, 100), (100, 250)],
            eval_paths: 100,
            reps,
            form: PenaltyForm::MultiPath,
            seed,
            substeps: crate::sde::DEFAULT_SUBSTEPS,
            grid: DimensionGrid::dyadic(5),
            appendix_interval: false,
        }
    }

    fn interval(&self, num_paths: usize) -> Result<Interval> {
        if self.appendix_interval {
            Interval::symmetric((num_paths as f64).ln().sqrt())
        } else {
            Interval::compact(-1.0, 1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub model: ModelId,
    pub kappa: f64,
    pub mean_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub kappa_star: f64,
    pub curve: Vec<CalibrationPoint>,
    /// `max` over models of the mean loss, one entry per κ.
    pub worst: Vec<f64>,
}

impl CalibrationResult {
    /// `model,kappa,mean_loss`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "model,kappa,mean_loss")?;
        for p in &self.curve {
            writeln!(out, "{},{},{}", p.model, p.kappa, p.mean_loss)?;
        }
        Ok(())
    }
}

/// For each κ, the held-out loss of the selected fit averaged over scenarios
/// and repetitions, per model. `κ*` minimizes the worst model's average.
pub fn calibrate_kappa(cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    if cfg.kappas.is_empty() || cfg.models.is_empty() || cfg.scenarios.is_empty() || cfg.reps == 0 {
        return Err(Error::InvalidParameter(
            "calibration needs at least one model, κ, scenario and repetition".into(),
        ));
    }
    let pens: Vec<PenaltySpec> = cfg
        .kappas
        .iter()
        .map(|&k| PenaltySpec::new(k, cfg.form))
        .collect::<Result<_>>()?;

    let mut curve = Vec::new();
    let mut per_model_means: Vec<Vec<f64>> = Vec::new();
    for &model in &cfg.models {
        let mut sums = vec![0.0; pens.len()];
        let mut count = 0usize;
        for &(num_paths, n) in &cfg.scenarios {
            let interval = cfg.interval(num_paths)?;
            let cell = CellConfig {
                model,
                plan: BasisPlan::new(crate::bases::FamilyKind::Bspline, interval),
                truth_interval: interval,
                grid: cfg.grid.clone(),
                penalty: pens[0],
                level: crate::regression::LevelRule::LogBigN,
                num_paths,
                n,
                eval_paths: cfg.eval_paths,
                reps: cfg.reps,
                seed: cfg.seed,
                substeps: cfg.substeps,
                estimators: vec![EstimatorKind::Adaptive],
            };
            let losses: Vec<Vec<f64>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let outcome = rep_outcome(&cell, rep).map_err(|e| Error::at_repetition(rep, e))?;
                    pens.iter()
                        .map(|pen| {
                            let (idx, _) = choose(&outcome.fits, pen, num_paths, n)?;
                            Ok(outcome.fit_losses[idx])
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            for rep_losses in &losses {
                for (s, l) in sums.iter_mut().zip(rep_losses) {
                    *s += l;
                }
            }
            count += losses.len();
        }
        let means: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
        for (kappa, mean) in cfg.kappas.iter().zip(&means) {
            curve.push(CalibrationPoint {
                model,
                kappa: *kappa,
                mean_loss: *mean,
            });
        }
        per_model_means.push(means);
    }
    let worst: Vec<f64> = (0..pens.len())
        .map(|k| per_model_means.iter().map(|m| m[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let idx = argmin(&worst).expect("non-empty κ list");
    Ok(CalibrationResult {
        kappa_star: cfg.kappas[idx],
        curve,
        worst,
    })
}
