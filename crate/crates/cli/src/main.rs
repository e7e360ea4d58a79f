//! `sigma-ridge`: simulate diffusion paths, fit and select ridge estimators of
//! σ², and run the Monte-Carlo tables.
//!
//! Every command writes `manifest.json` next to its outputs. Passing that file
//! back through `--config` repeats the run exactly.

mod commands;
mod params;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::UsageError;
use params::{load_config, Params};

#[derive(Parser)]
#[command(name = "sigma-ridge", version, about = "Ridge estimation of the squared diffusion coefficient")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// JSON parameter file or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate N paths and write them as `paths.csv`.
    Simulate(Common),
    /// Fit one ridge estimator of fixed size; writes `fit.json`.
    Fit(Common),
    /// Penalized choice of the size; writes `selection.csv` and `fit.json`.
    Select(Common),
    /// Reproduce a MISE table; writes `tableX.csv`, `tableX_layout.csv`, `tableX_raw.csv`.
    Table(Common),
    /// Calibrate κ; writes `calibration.csv` and `kappa.json`.
    Calibrate(Common),
    /// Single-path ridge against the kernel estimators; writes `compare.csv`.
    Compare(Common),
    /// Curves of several adaptive estimates on [-1, 1]; writes `bundle.csv`.
    Bundle(Common),
}

impl Command {
    fn parts(self) -> (&'static str, Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::Fit(c) => ("fit", c),
            Command::Select(c) => ("select", c),
            Command::Table(c) => ("table", c),
            Command::Calibrate(c) => ("calibrate", c),
            Command::Compare(c) => ("compare", c),
            Command::Bundle(c) => ("bundle", c),
        }
    }
}

fn run(name: &str, common: Common) -> anyhow::Result<()> {
    let mut params = match &common.config {
        Some(path) => load_config(path, name).map_err(|e| anyhow::Error::new(UsageError(format!("{e:#}"))))?,
        None => Params::default(),
    };
    params.overlay(&common.params);
    let out: &Path = &common.out;
    std::fs::create_dir_all(out).map_err(|e| anyhow::anyhow!("creating {}: {e}", out.display()))?;
    match name {
        "simulate" => commands::simulate(params, out),
        "fit" => commands::fit(params, out),
        "select" => commands::select(params, out),
        "table" => commands::table(params, out),
        "calibrate" => commands::calibrate(params, out),
        "compare" => commands::compare(params, out),
        _ => commands::bundle_cmd(params, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();
    match run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
