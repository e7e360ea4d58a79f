use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;
use sigma_ridge::bases::{BasisPlan, FamilyKind, DEFAULT_DEGREE};
use sigma_ridge::baseline::NwMode;
use sigma_ridge::metrics::{run_cell, EstimatorKind, MiseReport};
use sigma_ridge::regression::{build_response, fit_basis, LevelRule};
use sigma_ridge::sde::{builtin_model, derive_seed, simulate_sample, DiffusionPath, ModelId, PathSample, DEFAULT_SUBSTEPS};
use sigma_ridge::selection::{calibrate_kappa, select_dimension, CalibrationConfig, PenaltyForm, PenaltySpec, CALIBRATION_KAPPAS};
use sigma_ridge::study::{auto_level, auto_penalty, bundle, default_grid, make_cell, run_cells, table_cells, IntervalPreset};

use crate::params::{Manifest, Params};

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_REPS: usize = 100;

/// Bad flags or config values. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn parse_model(s: &str) -> anyhow::Result<ModelId> {
    s.parse().map_err(|e| usage(format!("--model: {e}")))
}

fn parse_preset(s: &str) -> anyhow::Result<IntervalPreset> {
    s.parse().map_err(|e| usage(format!("--interval: {e}")))
}

fn parse_basis(s: &str) -> anyhow::Result<FamilyKind> {
    match s.to_ascii_lowercase().as_str() {
        "bspline" | "spline" => Ok(FamilyKind::Bspline),
        "fourier" => Ok(FamilyKind::Fourier),
        "hermite" => Ok(FamilyKind::Hermite),
        _ => Err(usage(format!("--basis: unknown basis `{s}` (bspline, fourier, hermite)"))),
    }
}

fn parse_form(s: &str) -> anyhow::Result<PenaltyForm> {
    match s.to_ascii_lowercase().as_str() {
        "multi" => Ok(PenaltyForm::MultiPath),
        "single" => Ok(PenaltyForm::SinglePath),
        "appendix" => Ok(PenaltyForm::Appendix),
        _ => Err(usage(format!("--penalty: unknown form `{s}` (multi, single, appendix)"))),
    }
}

/// `None` for `auto`.
fn parse_level(s: &str) -> anyhow::Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(usage(format!("--L: expected `auto` or a positive number, got `{s}`"))),
    }
}

fn positive(name: &str, v: usize) -> anyhow::Result<usize> {
    if v == 0 {
        return Err(usage(format!("--{name} must be at least 1")));
    }
    Ok(v)
}

fn create(out: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = out.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_manifest(out: &Path, command: &str, params: &Params) -> anyhow::Result<()> {
    write_json(out, "manifest.json", &Manifest::new(command, params.clone()))
}

pub fn read_paths_csv(path: &Path) -> anyhow::Result<Vec<DiffusionPath>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut paths = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("x_")) {
            continue;
        }
        let values = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("{} line {}: {e}", path.display(), i + 1)))?;
        paths.push(DiffusionPath::new(values).map_err(|e| usage(format!("{} line {}: {e}", path.display(), i + 1)))?);
    }
    if paths.is_empty() {
        return Err(usage(format!("{} holds no paths", path.display())));
    }
    Ok(paths)
}

fn write_paths_csv<W: Write>(sample: &PathSample, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..=sample.n()).map(|k| format!("x_{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in sample.paths() {
        let row: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// The sample `simulate` writes and `fit`/`select` use when no file is given.
fn training_sample(model: ModelId, num_paths: usize, n: usize, seed: u64) -> anyhow::Result<PathSample> {
    let s = derive_seed(seed, &[model.seed_tag(), num_paths as u64, n as u64, 0, 0]);
    Ok(simulate_sample(&builtin_model(model), num_paths, n, DEFAULT_SUBSTEPS, s)?)
}

pub fn simulate(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let model = parse_model(p.model.get_or_insert_with(|| "M1".into()))?;
    let num_paths = positive("N", *p.num_paths.get_or_insert(10))?;
    let n = positive("n", *p.n.get_or_insert(100))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let sample = training_sample(model, num_paths, n, seed)?;
    let mut w = create(out, "paths.csv")?;
    write_paths_csv(&sample, &mut w)?;
    w.flush()?;
    write_manifest(out, "simulate", &p)
}

struct FitSetup {
    sample: PathSample,
    kind: FamilyKind,
    preset: IntervalPreset,
    plan: BasisPlan,
    level_override: Option<f64>,
}

fn fit_setup(p: &mut Params) -> anyhow::Result<FitSetup> {
    let kind = parse_basis(p.basis.get_or_insert_with(|| "bspline".into()))?;
    let default_preset = if kind == FamilyKind::Hermite { "realline" } else { "compact" };
    let preset = parse_preset(p.interval.get_or_insert_with(|| default_preset.into()))?;
    let degree = *p.degree.get_or_insert(DEFAULT_DEGREE);
    let level_override = parse_level(p.level.get_or_insert_with(|| "auto".into()))?;
    let sample = match &p.paths {
        Some(file) => {
            p.model = None;
            p.num_paths = None;
            p.n = None;
            p.seed = None;
            PathSample::new(read_paths_csv(Path::new(file))?, 0).map_err(|e| usage(e.to_string()))?
        }
        None => {
            let model = parse_model(p.model.get_or_insert_with(|| "M1".into()))?;
            let num_paths = positive("N", *p.num_paths.get_or_insert(10))?;
            let n = positive("n", *p.n.get_or_insert(100))?;
            training_sample(model, num_paths, n, *p.seed.get_or_insert(DEFAULT_SEED))?
        }
    };
    let interval = preset
        .resolve(kind, sample.len(), sample.n())
        .map_err(|e| usage(format!("--interval: {e}")))?;
    let plan = BasisPlan::new(kind, interval).with_degree(degree);
    Ok(FitSetup {
        sample,
        kind,
        preset,
        plan,
        level_override,
    })
}

fn resolve_level(setup: &FitSetup, adaptive: bool) -> anyhow::Result<f64> {
    match setup.level_override {
        Some(v) => Ok(v),
        None => Ok(auto_level(setup.kind, setup.preset, setup.sample.len(), adaptive)
            .resolve(setup.sample.len(), setup.sample.n())?),
    }
}

fn resolve_penalty(p: &mut Params, preset: IntervalPreset, num_paths: usize) -> anyhow::Result<PenaltySpec> {
    let auto = auto_penalty(preset, num_paths);
    let form = match &p.penalty {
        Some(s) => parse_form(s)?,
        None => auto.form,
    };
    let kappa = p.kappa.unwrap_or(auto.kappa);
    p.penalty = Some(form.as_str().to_string());
    p.kappa = Some(kappa);
    PenaltySpec::new(kappa, form).map_err(|e| usage(format!("--kappa: {e}")))
}

pub fn fit(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let setup = fit_setup(&mut p)?;
    let size = positive("K", *p.size.get_or_insert(4))?;
    let spec = setup.plan.spec(size).map_err(|e| usage(format!("--K: {e}")))?;
    let level = resolve_level(&setup, false)?;
    let u = build_response(&setup.sample);
    let fit = fit_basis(&spec, &setup.sample, &u, level)?;
    write_json(out, "fit.json", &fit.record())?;
    write_manifest(out, "fit", &p)
}

pub fn select(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let setup = fit_setup(&mut p)?;
    let level = resolve_level(&setup, true)?;
    let pen = resolve_penalty(&mut p, setup.preset, setup.sample.len())?;
    let grid = default_grid(setup.kind);
    let res = select_dimension(&setup.sample, &grid, &setup.plan, level, &pen)?;
    let mut w = create(out, "selection.csv")?;
    res.write_csv(&mut w)?;
    w.flush()?;
    write_json(out, "fit.json", &res.fit.record())?;
    write_manifest(out, "select", &p)
}

pub fn table(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let id = p.table.ok_or_else(|| usage("table needs --table (2, 3, 4, 5 or 6)"))?;
    let reps = positive("reps", *p.reps.get_or_insert(DEFAULT_REPS))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let mut cells = table_cells(id, reps, seed).map_err(|e| usage(format!("--table: {e}")))?;
    let level = match &p.level {
        Some(s) => parse_level(s)?,
        None => None,
    };
    let form = p.penalty.as_deref().map(parse_form).transpose()?;
    for cell in &mut cells {
        if let Some(v) = level {
            cell.config.level = LevelRule::Fixed(v);
        }
        if let Some(f) = form {
            cell.config.penalty.form = f;
        }
        if let Some(k) = p.kappa {
            cell.config.penalty.kappa = k;
        }
        PenaltySpec::new(cell.config.penalty.kappa, cell.config.penalty.form)
            .map_err(|e| usage(format!("--kappa: {e}")))?;
    }
    let result = run_cells(id, &cells)?;
    let mut w = create(out, &format!("table{id}.csv"))?;
    result.write_summary(&mut w)?;
    w.flush()?;
    let mut w = create(out, &format!("table{id}_layout.csv"))?;
    result.write_layout(&mut w)?;
    w.flush()?;
    let mut w = create(out, &format!("table{id}_raw.csv"))?;
    result.write_raw(&mut w)?;
    w.flush()?;
    write_manifest(out, "table", &p)
}

#[derive(Serialize)]
struct KappaChoice<'a> {
    kappa: f64,
    form: &'a str,
    candidates: &'a [f64],
    worst_mean_loss: &'a [f64],
}

pub fn calibrate(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let reps = positive("reps", *p.reps.get_or_insert(DEFAULT_REPS))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let form = parse_form(p.penalty.get_or_insert_with(|| "multi".into()))?;
    let kappas = p.kappas.get_or_insert_with(|| CALIBRATION_KAPPAS.to_vec()).clone();
    if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(usage("--V must list positive κ values"));
    }
    let mut cfg = CalibrationConfig::standard(reps, seed);
    cfg.kappas = kappas;
    cfg.form = form;
    if form == PenaltyForm::Appendix {
        cfg.appendix_interval = true;
    }
    if let Some(m) = &p.model {
        cfg.models = vec![parse_model(m)?];
    }
    let res = calibrate_kappa(&cfg)?;
    let mut w = create(out, "calibration.csv")?;
    res.write_csv(&mut w)?;
    w.flush()?;
    write_json(
        out,
        "kappa.json",
        &KappaChoice {
            kappa: res.kappa_star,
            form: form.as_str(),
            candidates: &cfg.kappas,
            worst_mean_loss: &res.worst,
        },
    )?;
    write_manifest(out, "calibrate", &p)
}

/// Single-path ridge against both kernel estimators.
pub fn compare(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let reps = positive("reps", *p.reps.get_or_insert(DEFAULT_REPS))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let n = positive("n", *p.n.get_or_insert(1000))?;
    let preset = parse_preset(p.interval.get_or_insert_with(|| "wide".into()))?;
    let models = match &p.model {
        Some(m) => vec![parse_model(m)?],
        None => ModelId::STUDY.to_vec(),
    };
    let level = match &p.level {
        Some(s) => parse_level(s)?,
        None => None,
    };
    let mut reports: Vec<MiseReport> = Vec::new();
    for model in models {
        let mut cell = make_cell(
            model,
            FamilyKind::Bspline,
            preset,
            1,
            n,
            vec![
                EstimatorKind::Adaptive,
                EstimatorKind::NadarayaWatson(NwMode::Literal),
                EstimatorKind::NadarayaWatson(NwMode::Corrected),
            ],
            reps,
            seed,
        )
        .map_err(|e| usage(e.to_string()))?;
        cell.config.penalty = resolve_penalty(&mut p, preset, 1)?;
        if let Some(v) = level {
            cell.config.level = LevelRule::Fixed(v);
        }
        reports.extend(run_cell(&cell.config, preset.label())?);
    }
    let mut w = create(out, "compare.csv")?;
    writeln!(w, "{}", MiseReport::csv_header())?;
    for r in &reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    write_manifest(out, "compare", &p)
}

pub fn bundle_cmd(mut p: Params, out: &Path) -> anyhow::Result<()> {
    let model = parse_model(p.model.get_or_insert_with(|| "M2".into()))?;
    let num_paths = positive("N", *p.num_paths.get_or_insert(100))?;
    let n = positive("n", *p.n.get_or_insert(100))?;
    let count = positive("count", *p.count.get_or_insert(10))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let pen = resolve_penalty(&mut p, IntervalPreset::Compact, num_paths)?;
    let b = bundle(model, num_paths, n, count, seed, pen).map_err(|e| anyhow!(e))?;
    let mut w = create(out, "bundle.csv")?;
    b.write_csv(&mut w)?;
    w.flush()?;
    write_manifest(out, "bundle", &p)
}
