use std::path::Path;

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Every tunable of every command. Flags and config files fill the same
/// record; a flag wins over the file.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Model id: M1, M2, M3 (study) or C1, C2, C3 (calibration).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// compact, logn, logN, growing, realline, wide or sqrtlogN.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<String>,
    /// bspline, fourier or hermite.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    /// Number of paths.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub num_paths: Option<usize>,
    /// Observations per path.
    #[arg(long = "n")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Monte-Carlo repetitions
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Penalty constant κ
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// multi, single or appendix.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<String>,
    /// Constraint level: `auto` or a positive number.
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    /// Segments (splines) or dimension (Fourier, Hermite) for `fit`.
    #[arg(long = "K")]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    /// Spline degree.
    #[arg(long = "M")]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Table id: 2, 3, 4, 5 or 6.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<u8>,
    /// Number of curves in a bundle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Candidate κ values for calibration, comma separated.
    #[arg(long = "V", value_delimiter = ',')]
    #[serde(rename = "V", skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    /// CSV of paths (one row per path) used instead of simulating.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

impl Params {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Params) {
        overlay!(
            self, other, model, interval, basis, num_paths, n, reps, seed, kappa, penalty, level, size, degree,
            table, count, kappas, paths
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Params,
}

impl Manifest {
    pub fn new(command: &str, config: Params) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
        }
    }
}

/// Reads either a manifest written by an earlier run or a bare parameter file.
pub fn load_config(path: &Path, command: &str) -> anyhow::Result<Params> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("command").is_some() && value.get("config").is_some() {
        let m: Manifest = serde_json::from_value(value).with_context(|| format!("reading manifest {}", path.display()))?;
        if m.command != command {
            bail!("manifest {} is for `{}`, not `{command}`", path.display(), m.command);
        }
        Ok(m.config)
    } else {
        serde_json::from_value(value).with_context(|| format!("reading config {}", path.display()))
    }
}
