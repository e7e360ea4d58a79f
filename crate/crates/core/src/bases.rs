//! Approximation bases: clamped B-splines on equally spaced knots, the
//! trigonometric basis rescaled to a compact interval, and Hermite functions
//! on the real line.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::PathSample;

/// Default spline degree.
pub const DEFAULT_DEGREE: usize = 3;

/// Largest supported spline degree (local evaluation works on fixed-size buffers).
pub const MAX_DEGREE: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interval {
    Compact { a: f64, b: f64 },
    RealLine,
}

impl Interval {
    pub fn compact(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Interval::Compact { a, b })
    }

    /// `[-A, A]`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Interval::compact(-half_width, half_width)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Interval::Compact { a, b } => Some((a, b)),
            Interval::RealLine => None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Interval::Compact { a, b } => a <= x && x <= b,
            Interval::RealLine => x.is_finite(),
        }
    }

    /// `1` on the interval, `0` outside.
    pub fn indicator(&self, x: f64) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Interval::Compact { a, b } => write!(f, "[{a},{b}]"),
            Interval::RealLine => f.write_str("R"),
        }
    }
}

/// How the trigonometric basis on `[0, 1]` is carried over to `[a, b]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierScaling {
    /// `(b − a)^{-1/2} f((x − a)/(b − a))`: orthonormal on `[a, b]`.
    #[default]
    Orthonormal,
    /// `(b − a)^{-1} f((x − a)/(b − a))`.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Bspline,
    Fourier,
    Hermite,
}

impl FamilyKind {
    /// The family of this kind indexed by a grid value: the number of knot
    /// segments `K` for splines, the dimension for the other two.
    pub fn with_size(self, size: usize, degree: usize) -> BasisFamily {
        match self {
            FamilyKind::Bspline => BasisFamily::Bspline {
                segments: size,
                degree,
            },
            FamilyKind::Fourier => BasisFamily::Fourier { dim: size },
            FamilyKind::Hermite => BasisFamily::Hermite { dim: size },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Bspline => "bspline",
            FamilyKind::Fourier => "fourier",
            FamilyKind::Hermite => "hermite",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFamily {
    /// `K = segments` equal knot intervals, polynomial degree `M = degree`;
    /// dimension `K + M`.
    Bspline { segments: usize, degree: usize },
    /// `{1, √2 cos(2πjx), √2 sin(2πjx), j = 1..d}`, dimension `2d + 1`.
    Fourier { dim: usize },
    Hermite { dim: usize },
}

impl BasisFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            BasisFamily::Bspline { .. } => FamilyKind::Bspline,
            BasisFamily::Fourier { .. } => FamilyKind::Fourier,
            BasisFamily::Hermite { .. } => FamilyKind::Hermite,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            BasisFamily::Bspline { segments, degree } => segments + degree,
            BasisFamily::Fourier { dim } | BasisFamily::Hermite { dim } => dim,
        }
    }
}

/// A family and interval without a size; `spec(size)` instantiates it at one
/// grid value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisPlan {
    pub kind: FamilyKind,
    pub degree: usize,
    pub interval: Interval,
    #[serde(default)]
    pub scaling: FourierScaling,
}

impl BasisPlan {
    pub fn new(kind: FamilyKind, interval: Interval) -> Self {
        BasisPlan {
            kind,
            degree: DEFAULT_DEGREE,
            interval,
            scaling: FourierScaling::default(),
        }
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn with_scaling(mut self, scaling: FourierScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn spec(&self, size: usize) -> Result<BasisSpec> {
        Ok(BasisSpec::new(self.kind.with_size(size, self.degree), self.interval)?
            .with_fourier_scaling(self.scaling))
    }

    /// Dimension `m` for a grid value.
    pub fn dim(&self, size: usize) -> usize {
        self.kind.with_size(size, self.degree).dim()
    }
}

/// Clamped knot vector `u_{-M} ≤ … ≤ u_{K+M}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    segments: usize,
    degree: usize,
}

impl KnotVector {
    /// Knot `u_i` for `i ∈ [-M, K + M]`.
    pub fn get(&self, i: isize) -> f64 {
        self.knots[(i + self.degree as isize) as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

pub fn make_knots(a: f64, b: f64, segments: usize, degree: usize) -> Result<KnotVector> {
    Interval::compact(a, b)?;
    if segments == 0 || degree == 0 {
        return Err(Error::InvalidBasis(format!(
            "spline needs K >= 1 and M >= 1 (got K = {segments}, M = {degree})"
        )));
    }
    let width = b - a;
    let mut knots = Vec::with_capacity(segments + 2 * degree + 1);
    knots.extend(std::iter::repeat_n(a, degree + 1));
    knots.extend((1..segments).map(|i| a + i as f64 * width / segments as f64));
    knots.extend(std::iter::repeat_n(b, degree + 1));
    Ok(KnotVector {
        knots,
        segments,
        degree,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    family: BasisFamily,
    interval: Interval,
    scaling: FourierScaling,
    knots: Option<KnotVector>,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, interval: Interval) -> Result<Self> {
        let knots = match (family, interval) {
            (BasisFamily::Bspline { segments, degree }, Interval::Compact { a, b }) => {
                if degree > MAX_DEGREE {
                    return Err(Error::InvalidBasis(format!(
                        "spline degree {degree} exceeds the supported maximum {MAX_DEGREE}"
                    )));
                }
                Some(make_knots(a, b, segments, degree)?)
            }
            (BasisFamily::Bspline { .. }, Interval::RealLine) => {
                return Err(Error::InvalidBasis("splines need a compact interval".into()))
            }
            (BasisFamily::Fourier { dim }, Interval::Compact { .. }) => {
                if dim % 2 == 0 {
                    return Err(Error::InvalidBasis(format!(
                        "Fourier dimension must be odd (got {dim})"
                    )));
                }
                None
            }
            (BasisFamily::Fourier { .. }, Interval::RealLine) => {
                return Err(Error::InvalidBasis(
                    "the Fourier basis needs a compact interval".into(),
                ))
            }
            (BasisFamily::Hermite { dim }, Interval::RealLine) => {
                if dim == 0 {
                    return Err(Error::InvalidBasis("Hermite dimension must be >= 1".into()));
                }
                None
            }
            (BasisFamily::Hermite { .. }, Interval::Compact { .. }) => {
                return Err(Error::InvalidBasis(
                    "Hermite functions live on the real line".into(),
                ))
            }
        };
        Ok(BasisSpec {
            family,
            interval,
            scaling: FourierScaling::default(),
            knots,
        })
    }

    pub fn bspline(a: f64, b: f64, segments: usize, degree: usize) -> Result<Self> {
        BasisSpec::new(
            BasisFamily::Bspline { segments, degree },
            Interval::compact(a, b)?,
        )
    }

    pub fn fourier(a: f64, b: f64, dim: usize) -> Result<Self> {
        BasisSpec::new(BasisFamily::Fourier { dim }, Interval::compact(a, b)?)
    }

    pub fn hermite(dim: usize) -> Result<Self> {
        BasisSpec::new(BasisFamily::Hermite { dim }, Interval::RealLine)
    }

    pub fn with_fourier_scaling(mut self, scaling: FourierScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn fourier_scaling(&self) -> FourierScaling {
        self.scaling
    }

    pub fn knots(&self) -> Option<&KnotVector> {
        self.knots.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Upper bound on the number of nonzero entries of one evaluation.
    pub fn local_width(&self) -> usize {
        match self.family {
            BasisFamily::Bspline { degree, .. } => degree + 1,
            _ => self.dim(),
        }
    }

    /// All basis values at `x`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Writes all `dim()` basis values at `x` into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        out.fill(0.0);
        let mut local = [0.0; MAX_DEGREE + 1];
        let width = self.local_width();
        if width <= local.len() {
            if let Some(offset) = self.eval_local(x, &mut local[..width]) {
                out[offset..offset + width].copy_from_slice(&local[..width]);
            }
        } else if let Some(offset) = self.eval_local(x, out) {
            debug_assert_eq!(offset, 0);
        }
    }

    /// Evaluates the (possibly) nonzero window of the basis at `x`.
    ///
    /// `buf` must hold `local_width()` values. Returns the index of the basis
    /// function stored in `buf[0]`, or `None` when every basis function
    /// vanishes at `x` (points outside a compact interval).
    pub fn eval_local(&self, x: f64, buf: &mut [f64]) -> Option<usize> {
        match self.family {
            BasisFamily::Bspline { segments, degree } => {
                let knots = self.knots.as_ref().expect("spline spec carries knots");
                bspline_local(knots.as_slice(), segments, degree, x, buf)
            }
            BasisFamily::Fourier { dim } => {
                let (a, b) = self.interval.bounds().expect("compact");
                if !(a <= x && x <= b) {
                    return None;
                }
                let width = b - a;
                let scale = match self.scaling {
                    FourierScaling::Orthonormal => width.sqrt().recip(),
                    FourierScaling::Literal => width.recip(),
                };
                fourier_values((x - a) / width, scale, &mut buf[..dim]);
                Some(0)
            }
            BasisFamily::Hermite { dim } => {
                hermite_values(x, &mut buf[..dim]);
                Some(0)
            }
        }
    }
}

fn bspline_local(knots: &[f64], segments: usize, degree: usize, x: f64, out: &mut [f64]) -> Option<usize> {
    let a = knots[0];
    let b = knots[knots.len() - 1];
    if !(a <= x && x <= b) {
        return None;
    }
    // knot interval i ∈ [0, K) with u_i <= x < u_{i+1}; x = b goes to the last one
    let mut i = (((x - a) / (b - a)) * segments as f64).floor() as usize;
    i = i.min(segments - 1);
    let u = |i: usize| knots[i + degree];
    while i > 0 && x < u(i) {
        i -= 1;
    }
    while i + 1 < segments && x >= u(i + 1) {
        i += 1;
    }

    // Cox–de Boor triangle for the degree+1 functions nonzero on the span
    let span = i + degree;
    let mut left = [0.0; MAX_DEGREE + 1];
    let mut right = [0.0; MAX_DEGREE + 1];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
    Some(i)
}

fn fourier_values(t: f64, scale: f64, out: &mut [f64]) {
    out[0] = scale;
    let amp = scale * SQRT_2;
    let mut j = 1;
    while 2 * j < out.len() {
        let arg = 2.0 * PI * j as f64 * t;
        out[2 * j - 1] = amp * arg.cos();
        out[2 * j] = amp * arg.sin();
        j += 1;
    }
}

/// Normalized Hermite functions `h_0 … h_{m−1}` by the three-term recurrence
/// `h_{j+1} = √(2/(j+1)) x h_j − √(j/(j+1)) h_{j−1}`.
fn hermite_values(x: f64, out: &mut [f64]) {
    let h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out[0] = h0;
    if out.len() == 1 {
        return;
    }
    out[1] = SQRT_2 * x * h0;
    for j in 1..out.len() - 1 {
        let jf = j as f64;
        out[j + 1] = (2.0 / (jf + 1.0)).sqrt() * x * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
    }
}

/// The `(N·n) × m` matrix whose row `(j, k)` holds the basis at `X^j_{kΔ}`,
/// `k = 0..n` (terminal observation excluded), path-major.
pub fn design_matrix(spec: &BasisSpec, sample: &PathSample) -> DMatrix<f64> {
    let rows = sample.num_design_points();
    let m = spec.dim();
    let mut f = DMatrix::zeros(rows, m);
    let mut row = vec![0.0; m];
    for (r, x) in sample.design_points().enumerate() {
        spec.eval_into(x, &mut row);
        for (c, v) in row.iter().enumerate() {
            f[(r, c)] = *v;
        }
    }
    f
}

/// Candidate sizes for model selection: `K` values for splines, dimensions
/// otherwise. Sorted, distinct, nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionGrid {
    values: Vec<usize>,
}

impl DimensionGrid {
    pub fn new(mut values: Vec<usize>) -> Result<Self> {
        values.sort_unstable();
        values.dedup();
        if values.is_empty() || values[0] == 0 {
            return Err(Error::InvalidParameter(
                "dimension grid must be non-empty and contain only positive sizes".into(),
            ));
        }
        Ok(DimensionGrid { values })
    }

    /// `{2^q : q = 0..=q_max}`; nested spline spaces.
    pub fn dyadic(q_max: u32) -> Self {
        DimensionGrid {
            values: (0..=q_max).map(|q| 1usize << q).collect(),
        }
    }

    /// `{1, …, max}`.
    pub fn up_to(max: usize) -> Result<Self> {
        DimensionGrid::new((1..=max).collect())
    }

    /// Odd dimensions `{1, 3, …}` up to `max`.
    pub fn odd_up_to(max: usize) -> Result<Self> {
        DimensionGrid::new((1..=max).step_by(2).collect())
    }

    /// Dyadic spline grid restricted to `K + M ≤ √min(n, N) / log(Nn)`.
    pub fn theory_strict(q_max: u32, num_paths: usize, n: usize, degree: usize) -> Result<Self> {
        let bound = (num_paths.min(n) as f64).sqrt() / ((num_paths * n) as f64).ln();
        let values: Vec<usize> = DimensionGrid::dyadic(q_max)
            .values
            .into_iter()
            .filter(|&k| (k + degree) as f64 <= bound)
            .collect();
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "no spline size satisfies K + {degree} <= {bound:.3} for N = {num_paths}, n = {n}"
            )));
        }
        Ok(DimensionGrid { values })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
