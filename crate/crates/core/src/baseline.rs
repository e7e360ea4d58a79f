//! Nadaraya–Watson kernel estimator of σ² from a single path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::DiffusionPath;

/// Denominators below this are treated as zero.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * z * z).exp() / (2.0 * PI).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    Scott,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Scott,
        }
    }
}

impl KernelSpec {
    pub fn resolve(&self, path: &DiffusionPath) -> Result<f64> {
        let h = match self.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Scott => scott_bandwidth(path)?,
        };
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive (got {h})")));
        }
        Ok(h)
    }
}

/// Which version of the ratio is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NwMode {
    /// Numerator `Σ_{k=1}^{n−1} K(·)(ΔX_k)²/n`, denominator `Σ_{k=1}^{n} K(·)`.
    Literal,
    /// `Σ_{k=0}^{n−1} K(·) n (ΔX_k)² / Σ_{k=0}^{n−1} K(·)`.
    Corrected,
}

impl NwMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NwMode::Literal => "literal",
            NwMode::Corrected => "corrected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NwValue {
    pub value: f64,
    pub underflow: bool,
}

/// `sd(x_0..x_n) · n^{-1/5}` with the `n − 1` sample standard deviation.
pub fn scott_bandwidth(path: &DiffusionPath) -> Result<f64> {
    let n = path.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "the Scott rule needs n >= 2 (got {n})"
        )));
    }
    let v = path.values();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::DegeneratePath);
    }
    Ok(sd * (n as f64).powf(-0.2))
}

/// Kernel estimator bound to one path and a resolved bandwidth.
#[derive(Clone, Debug)]
pub struct NwEstimator<'a> {
    path: &'a DiffusionPath,
    kernel: Kernel,
    bandwidth: f64,
    mode: NwMode,
}

impl<'a> NwEstimator<'a> {
    pub fn new(path: &'a DiffusionPath, spec: &KernelSpec, mode: NwMode) -> Result<Self> {
        Ok(NwEstimator {
            path,
            kernel: spec.kernel,
            bandwidth: spec.resolve(path)?,
            mode,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn mode(&self) -> NwMode {
        self.mode
    }

    pub fn eval(&self, x: f64) -> NwValue {
        let (literal, corrected) = self.eval_pair(x);
        match self.mode {
            NwMode::Literal => literal,
            NwMode::Corrected => corrected,
        }
    }

    /// Both modes from one pass over the kernel weights.
    pub fn eval_pair(&self, x: f64) -> (NwValue, NwValue) {
        let v = self.path.values();
        let n = self.path.n();
        let nf = n as f64;
        let inv_h = 1.0 / self.bandwidth;
        // numerator sums over k = 1..n−1 are shared; the end terms differ
        let mut inner_num = 0.0;
        let mut inner_den = 0.0;
        for k in 1..n {
            let wk = self.kernel.eval((v[k] - x) * inv_h);
            let d = v[k + 1] - v[k];
            inner_num += wk * d * d;
            inner_den += wk;
        }
        let w0 = self.kernel.eval((v[0] - x) * inv_h);
        let wn = self.kernel.eval((v[n] - x) * inv_h);
        let d0 = v[1] - v[0];
        let literal = ratio(inner_num / nf, inner_den + wn);
        let corrected = ratio((inner_num + w0 * d0 * d0) * nf, inner_den + w0);
        (literal, corrected)
    }
}

fn ratio(num: f64, den: f64) -> NwValue {
    if den < UNDERFLOW {
        NwValue {
            value: 0.0,
            underflow: true,
        }
    } else {
        NwValue {
            value: num / den,
            underflow: false,
        }
    }
}

pub fn nw_estimate(path: &DiffusionPath, x: f64, spec: &KernelSpec, mode: NwMode) -> Result<NwValue> {
    Ok(NwEstimator::new(path, spec, mode)?.eval(x))
}
