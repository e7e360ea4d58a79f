//! Preset experiment grids and their CSV layouts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bases::{BasisPlan, DimensionGrid, FamilyKind, Interval};
use crate::baseline::NwMode;
use crate::error::{Error, Result};
use crate::metrics::{run_cell, CellConfig, EstimatorKind, MiseReport};
use crate::regression::{build_response, fit_grid, LevelRule};
use crate::sde::{builtin_model, derive_seed, simulate_sample, ModelId, DEFAULT_SUBSTEPS};
use crate::selection::{choose, PenaltyForm, PenaltySpec};

/// Half-width of the surrogate for the real line in the kernel comparison.
pub const WIDE_HALF_WIDTH: f64 = 1e6;

/// Exponent of the growing interval `[-(log N)^p, (log N)^p]`.
pub const GROWING_EXPONENT: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalPreset {
    /// `[-1, 1]`
    Compact,
    /// `[-log n, log n]`
    LogSmallN,
    /// `[-log N, log N]`
    LogBigN,
    /// `[-(log N)^0.4, (log N)^0.4]`
    Growing,
    /// Hermite functions on ℝ; splines on `[-log n, log n]` for one path and
    /// `[-log N, log N]` otherwise.
    RealLine,
    /// `[-10⁶, 10⁶]`
    Wide,
    /// `[-√log N, √log N]`
    SqrtLogBigN,
}

impl IntervalPreset {
    pub const ALL: [IntervalPreset; 7] = [
        IntervalPreset::Compact,
        IntervalPreset::LogSmallN,
        IntervalPreset::LogBigN,
        IntervalPreset::Growing,
        IntervalPreset::RealLine,
        IntervalPreset::Wide,
        IntervalPreset::SqrtLogBigN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntervalPreset::Compact => "compact",
            IntervalPreset::LogSmallN => "logn",
            IntervalPreset::LogBigN => "logN",
            IntervalPreset::Growing => "growing",
            IntervalPreset::RealLine => "realline",
            IntervalPreset::Wide => "wide",
            IntervalPreset::SqrtLogBigN => "sqrtlogN",
        }
    }

    /// Column label used in the table layouts.
    pub fn label(self) -> &'static str {
        match self {
            IntervalPreset::Compact => "[-1,1]",
            IntervalPreset::LogSmallN => "[-log n,log n]",
            IntervalPreset::LogBigN => "[-log N,log N]",
            IntervalPreset::Growing => "[-A_N,A_N]",
            IntervalPreset::RealLine | IntervalPreset::Wide => "R",
            IntervalPreset::SqrtLogBigN => "[-sqrt(log N),sqrt(log N)]",
        }
    }

    /// Fitting interval for a family and sample size.
    pub fn resolve(self, kind: FamilyKind, num_paths: usize, n: usize) -> Result<Interval> {
        let log_n = (n as f64).ln();
        let log_big = (num_paths as f64).ln();
        match self {
            IntervalPreset::Compact => Interval::compact(-1.0, 1.0),
            IntervalPreset::LogSmallN => Interval::symmetric(log_n),
            IntervalPreset::LogBigN => Interval::symmetric(log_big),
            IntervalPreset::Growing => Interval::symmetric(log_big.max(0.0).powf(GROWING_EXPONENT)),
            IntervalPreset::RealLine => match kind {
                FamilyKind::Hermite => Ok(Interval::RealLine),
                _ if num_paths == 1 => Interval::symmetric(log_n),
                _ => Interval::symmetric(log_big),
            },
            IntervalPreset::Wide => Interval::symmetric(WIDE_HALF_WIDTH),
            IntervalPreset::SqrtLogBigN => Interval::symmetric(log_big.max(0.0).sqrt()),
        }
    }

    /// Support of the target `σ² · 1_I`.
    pub fn truth_interval(self, kind: FamilyKind, num_paths: usize, n: usize) -> Result<Interval> {
        match self {
            IntervalPreset::RealLine => Ok(Interval::RealLine),
            other => other.resolve(kind, num_paths, n),
        }
    }

    pub fn is_compact_fixed(self) -> bool {
        self == IntervalPreset::Compact
    }
}

impl fmt::Display for IntervalPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntervalPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown interval preset '{s}'")))
    }
}

/// Default constraint level for a regime. `adaptive` is set when the fits
/// feed a penalized selection.
pub fn auto_level(kind: FamilyKind, preset: IntervalPreset, num_paths: usize, adaptive: bool) -> LevelRule {
    let single = num_paths == 1;
    match (kind, preset) {
        (FamilyKind::Hermite, _) if single => LevelRule::LogSqSmallN,
        (FamilyKind::Hermite, _) => LevelRule::LogSqBigN,
        (_, IntervalPreset::Growing) if !single => LevelRule::LogBigN,
        _ if single && adaptive => LevelRule::SqrtLogSmallN,
        _ if single && preset.is_compact_fixed() => LevelRule::LogSmallN,
        _ if single => LevelRule::LogSqSmallN,
        _ if adaptive => LevelRule::LogBigN,
        _ if preset.is_compact_fixed() => LevelRule::LogNn,
        _ => LevelRule::LogSqBigN,
    }
}

/// Default penalty: single-path form for `N = 1`, `κ = 4` on `[-1, 1]` and
/// for one path, `κ = 5` otherwise.
pub fn auto_penalty(preset: IntervalPreset, num_paths: usize) -> PenaltySpec {
    if num_paths == 1 {
        PenaltySpec {
            kappa: 4.0,
            form: PenaltyForm::SinglePath,
        }
    } else if preset.is_compact_fixed() {
        PenaltySpec {
            kappa: 4.0,
            form: PenaltyForm::MultiPath,
        }
    } else {
        PenaltySpec {
            kappa: 5.0,
            form: PenaltyForm::MultiPath,
        }
    }
}

/// Default size grid for a family.
pub fn default_grid(kind: FamilyKind) -> DimensionGrid {
    match kind {
        FamilyKind::Bspline => DimensionGrid::dyadic(5),
        FamilyKind::Fourier => DimensionGrid::odd_up_to(31).expect("non-empty"),
        FamilyKind::Hermite => DimensionGrid::up_to(15).expect("non-empty"),
    }
}

/// One cell of a preset table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub preset: IntervalPreset,
    pub config: CellConfig,
}

#[allow(clippy::too_many_arguments)]
pub fn make_cell(
    model: ModelId,
    kind: FamilyKind,
    preset: IntervalPreset,
    num_paths: usize,
    n: usize,
    estimators: Vec<EstimatorKind>,
    reps: usize,
    seed: u64,
) -> Result<TableCell> {
    let adaptive = estimators.contains(&EstimatorKind::Adaptive);
    Ok(TableCell {
        preset,
        config: CellConfig {
            model,
            plan: BasisPlan::new(kind, preset.resolve(kind, num_paths, n)?),
            truth_interval: preset.truth_interval(kind, num_paths, n)?,
            grid: default_grid(kind),
            penalty: auto_penalty(preset, num_paths),
            level: auto_level(kind, preset, num_paths, adaptive),
            num_paths,
            n,
            eval_paths: 100,
            reps,
            seed,
            substeps: DEFAULT_SUBSTEPS,
            estimators,
        },
    })
}

/// Table numbers: 2 and 3 are the spline tables at `n = 100` and `n = 250`,
/// 4 the Hermite oracle, 5 the kernel comparison, 6 the single-path spline
/// table on `[-1, 1]`.
pub const TABLE_IDS: [u8; 5] = [2, 3, 4, 5, 6];

pub fn table_cells(table: u8, reps: usize, seed: u64) -> Result<Vec<TableCell>> {
    let both = || vec![EstimatorKind::Adaptive, EstimatorKind::Oracle];
    let mut cells = Vec::new();
    match table {
        2 | 3 => {
            let n = if table == 2 { 100 } else { 250 };
            for model in ModelId::STUDY {
                for preset in [IntervalPreset::Compact, IntervalPreset::RealLine] {
                    for num_paths in [10, 100, 1000] {
                        cells.push(make_cell(model, FamilyKind::Bspline, preset, num_paths, n, both(), reps, seed)?);
                    }
                }
            }
        }
        4 => {
            for model in ModelId::STUDY {
                for (num_paths, n) in [(10, 100), (100, 100), (100, 250)] {
                    cells.push(make_cell(
                        model,
                        FamilyKind::Hermite,
                        IntervalPreset::RealLine,
                        num_paths,
                        n,
                        vec![EstimatorKind::Oracle],
                        reps,
                        seed,
                    )?);
                }
            }
        }
        5 => {
            for model in ModelId::STUDY {
                cells.push(make_cell(
                    model,
                    FamilyKind::Bspline,
                    IntervalPreset::Wide,
                    1,
                    1000,
                    vec![
                        EstimatorKind::Adaptive,
                        EstimatorKind::NadarayaWatson(NwMode::Literal),
                        EstimatorKind::NadarayaWatson(NwMode::Corrected),
                    ],
                    reps,
                    seed,
                )?);
            }
        }
        6 => {
            for model in ModelId::STUDY {
                for n in [100, 1000] {
                    cells.push(make_cell(model, FamilyKind::Bspline, IntervalPreset::Compact, 1, n, both(), reps, seed)?);
                }
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown table {other}; expected one of 2, 3, 4, 5, 6"
            )))
        }
    }
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub table: u8,
    pub reports: Vec<MiseReport>,
}

pub fn run_table(table: u8, reps: usize, seed: u64) -> Result<TableResult> {
    run_cells(table, &table_cells(table, reps, seed)?)
}

pub fn run_cells(table: u8, cells: &[TableCell]) -> Result<TableResult> {
    let mut reports = Vec::new();
    for cell in cells {
        reports.extend(run_cell(&cell.config, cell.preset.label())?);
    }
    Ok(TableResult { table, reports })
}

impl TableResult {
    /// `model,interval,estimator,N,n,mean,sd,flag`
    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", MiseReport::csv_header())?;
        for r in &self.reports {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// `model,interval,estimator,N,n,rep,loss,size`
    pub fn write_raw<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "model,interval,estimator,N,n,rep,loss,size")?;
        for r in &self.reports {
            r.write_raw(&mut out)?;
        }
        Ok(())
    }

    /// One row per (model, interval, estimator), one `mean (sd)` column per
    /// `(N, n)` pair in order of first appearance.
    pub fn write_layout<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut columns: Vec<(usize, usize)> = Vec::new();
        let mut rows: Vec<(ModelId, String, EstimatorKind)> = Vec::new();
        for r in &self.reports {
            if !columns.contains(&(r.num_paths, r.n)) {
                columns.push((r.num_paths, r.n));
            }
            let key = (r.model, r.interval.clone(), r.estimator);
            if !rows.contains(&key) {
                rows.push(key);
            }
        }
        write!(out, "model,interval,estimator")?;
        for (big, small) in &columns {
            write!(out, ",N={big} n={small}")?;
        }
        writeln!(out)?;
        for (model, interval, estimator) in &rows {
            write!(out, "{model},{interval},{estimator}")?;
            for (big, small) in &columns {
                let cell = self.reports.iter().find(|r| {
                    r.model == *model
                        && &r.interval == interval
                        && r.estimator == *estimator
                        && r.num_paths == *big
                        && r.n == *small
                });
                match cell {
                    Some(r) => write!(out, ",{:.4} ({:.4})", r.mean, r.sd)?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn find(&self, model: ModelId, interval: &str, estimator: EstimatorKind, num_paths: usize, n: usize) -> Option<&MiseReport> {
        self.reports.iter().find(|r| {
            r.model == model && r.interval == interval && r.estimator == estimator && r.num_paths == num_paths && r.n == n
        })
    }
}

/// Points of the bundle grid on `[-1, 1]`.
pub const BUNDLE_POINTS: usize = 201;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub xs: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub chosen: Vec<usize>,
}

/// `count` adaptive spline estimates on `[-1, 1]` from independent samples.
pub fn bundle(model: ModelId, num_paths: usize, n: usize, count: usize, seed: u64, penalty: PenaltySpec) -> Result<Bundle> {
    if count == 0 {
        return Err(Error::InvalidParameter("bundle needs count >= 1".into()));
    }
    let spec = builtin_model(model);
    let preset = IntervalPreset::Compact;
    let plan = BasisPlan::new(FamilyKind::Bspline, preset.resolve(FamilyKind::Bspline, num_paths, n)?);
    let grid = default_grid(FamilyKind::Bspline);
    let level = auto_level(FamilyKind::Bspline, preset, num_paths, true).resolve(num_paths, n)?;
    let xs: Vec<f64> = (0..BUNDLE_POINTS)
        .map(|i| -1.0 + 2.0 * i as f64 / (BUNDLE_POINTS - 1) as f64)
        .collect();
    let truth = xs.iter().map(|&x| spec.sigma_sq(x)).collect();
    let mut estimates = Vec::with_capacity(count);
    let mut chosen = Vec::with_capacity(count);
    for r in 0..count {
        let sample_seed = derive_seed(seed, &[model.seed_tag(), num_paths as u64, n as u64, r as u64, 2]);
        let sample = simulate_sample(&spec, num_paths, n, DEFAULT_SUBSTEPS, sample_seed)
            .map_err(|e| Error::at_repetition(r, e))?;
        let u = build_response(&sample);
        let fits = fit_grid(&plan, &grid, &sample, &u, level).map_err(|e| Error::at_repetition(r, e))?;
        let (idx, _) = choose(&fits, &penalty, num_paths, n)?;
        let est = fits[idx].estimator();
        estimates.push(xs.iter().map(|&x| est.eval(x)).collect());
        chosen.push(grid.values()[idx]);
    }
    Ok(Bundle {
        xs,
        truth,
        estimates,
        chosen,
    })
}

impl Bundle {
    /// `x,truth,est_1,…,est_count`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "x,truth")?;
        for i in 1..=self.estimates.len() {
            write!(out, ",est_{i}")?;
        }
        writeln!(out)?;
        for (i, x) in self.xs.iter().enumerate() {
            write!(out, "{x},{}", self.truth[i])?;
            for e in &self.estimates {
                write!(out, ",{}", e[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
