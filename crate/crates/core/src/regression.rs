//! Squared-increment responses and the ℓ2-ball constrained least-squares fit.
//!
//! Rows of the design are folded one at a time into an upper-triangular
//! factor `R` (Givens rotations), so `‖u − F a‖² = ‖z − R a‖² + rss` never
//! needs `F` in memory. Spline rows only touch `M + 1` columns, which keeps
//! the accumulation banded. The ball-constrained problem is then solved on
//! the SVD of `R`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisFamily, BasisPlan, BasisSpec, DimensionGrid, FamilyKind, Interval, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::sde::PathSample;

/// Relative threshold under which singular values are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

const SECULAR_TOL: f64 = 1e-12;
const SECULAR_MAX_ITER: usize = 500;
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 100;

/// `U^j_k = (X^j_{k+1} − X^j_k)² / Δ`, path-major like the design rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseVector {
    values: Vec<f64>,
}

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteInput);
        }
        Ok(ResponseVector { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn build_response(sample: &PathSample) -> ResponseVector {
    let mut values = Vec::with_capacity(sample.num_design_points());
    for path in sample.paths() {
        let n = path.n() as f64;
        values.extend(path.values().windows(2).map(|w| {
            let d = w[1] - w[0];
            d * d * n
        }));
    }
    ResponseVector { values }
}

/// `(1/len) Σ (u_i − h_i)²`.
pub fn contrast(h_values: &[f64], u: &ResponseVector) -> Result<f64> {
    if h_values.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: h_values.len(),
        });
    }
    let ss: f64 = h_values
        .iter()
        .zip(u.as_slice())
        .map(|(h, u)| (u - h) * (u - h))
        .sum();
    Ok(ss / u.len() as f64)
}

/// Incremental QR factorization of a least-squares system.
#[derive(Clone, Debug)]
pub struct LeastSquaresAccumulator {
    m: usize,
    r: Vec<f64>,
    z: Vec<f64>,
    rss: f64,
    rows: usize,
    // upper bandwidth of R: every pushed row spans at most band + 1 columns
    band: usize,
    work: Vec<f64>,
}

impl LeastSquaresAccumulator {
    pub fn new(m: usize) -> Self {
        LeastSquaresAccumulator {
            m,
            r: vec![0.0; m * m],
            z: vec![0.0; m],
            rss: 0.0,
            rows: 0,
            band: 0,
            work: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Residual sum of squares left orthogonal to the column space.
    pub fn rss(&self) -> f64 {
        self.rss
    }

    /// Adds the row whose entries `offset .. offset + values.len()` are
    /// `values` (zero elsewhere) with response `target`.
    pub fn push_row(&mut self, offset: usize, values: &[f64], target: f64) -> Result<()> {
        let m = self.m;
        let width = values.len();
        if offset + width > m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: offset + width,
            });
        }
        if !target.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        self.rows += 1;
        if width == 0 {
            self.rss += target * target;
            return Ok(());
        }
        self.band = self.band.max(width - 1);
        let band = self.band;

        let w = &mut self.work;
        w[offset..offset + width].copy_from_slice(values);
        let mut t = target;
        // R keeps upper bandwidth `band`, but the rotated row picks up
        // fill-in from each R row it meets; `hi` bounds its nonzero extent
        let mut hi = offset + width - 1;
        let mut i = offset;
        while i <= hi && i < m {
            let v = w[i];
            if v == 0.0 {
                i += 1;
                continue;
            }
            let row = &mut self.r[i * m..(i + 1) * m];
            let d = row[i];
            let rho = d.hypot(v);
            let (c, s) = (d / rho, v / rho);
            let end = (i + band + 1).min(m);
            row[i] = rho;
            w[i] = 0.0;
            for j in i + 1..end {
                let rij = row[j];
                let wj = w[j];
                row[j] = c * rij + s * wj;
                w[j] = c * wj - s * rij;
            }
            let zi = self.z[i];
            self.z[i] = c * zi + s * t;
            t = c * t - s * zi;
            if d != 0.0 {
                hi = hi.max(end - 1);
            }
            i += 1;
        }
        self.rss += t * t;
        Ok(())
    }

    /// The triangular factor `R` (m × m).
    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, &self.r)
    }

    /// Minimizes `‖u − F a‖²` over `‖a‖² ≤ radius_sq`.
    pub fn solve_ball(&self, radius_sq: f64) -> Result<RidgeSolution> {
        solve_ball(self.r_matrix(), DVector::from_column_slice(&self.z), self.rss, radius_sq)
    }
}

/// Solution of the ball-constrained least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeSolution {
    pub coeffs: Vec<f64>,
    /// Multiplier `λ ≥ 0` of the ball constraint.
    pub lagrange: f64,
    pub active: bool,
    pub radius_sq: f64,
    /// `‖u − F a‖²` at the solution.
    pub objective: f64,
    /// Number of rows folded into the fit.
    pub rows: usize,
}

impl RidgeSolution {
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }
}

fn solve_ball(r: DMatrix<f64>, z: DVector<f64>, rss: f64, radius_sq: f64) -> Result<RidgeSolution> {
    if !(radius_sq > 0.0) || !radius_sq.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "constraint radius m·L must be positive and finite (got {radius_sq})"
        )));
    }
    let m = r.ncols();
    let (w, s, v) = jacobi_svd(r.clone());
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let tol = s_max * RANK_TOL;
    let keep: Vec<bool> = s.iter().map(|&si| si > tol && si > 0.0).collect();
    // with R = U S Vᵀ and W = U S, g_i = s_i (Uᵀz)_i = w_iᵀz; coordinates of a
    // in the V basis are g_i / (s_i² + λ)
    let g: Vec<f64> = (0..m).map(|i| if keep[i] { w.column(i).dot(&z) } else { 0.0 }).collect();
    let norm_sq_at = |lambda: f64| -> f64 {
        (0..m)
            .filter(|&i| keep[i])
            .map(|i| {
                let b = g[i] / (s[i] * s[i] + lambda);
                b * b
            })
            .sum()
    };

    let mut lambda = 0.0;
    let free_norm_sq = norm_sq_at(0.0);
    if free_norm_sq > radius_sq {
        lambda = secular_root(&g, &s, &keep, radius_sq);
    }

    let mut b = DVector::zeros(m);
    for i in 0..m {
        if keep[i] {
            b[i] = g[i] / (s[i] * s[i] + lambda);
        }
    }
    let mut a = v * &b;
    let norm_sq = a.norm_squared();
    if norm_sq > radius_sq {
        a *= (radius_sq / norm_sq).sqrt();
    }
    let residual = z - &r * &a;
    let objective = residual.norm_squared() + rss;
    Ok(RidgeSolution {
        coeffs: a.iter().cloned().collect(),
        lagrange: lambda,
        active: lambda > 0.0,
        radius_sq,
        objective,
        rows: 0,
    })
}

/// One-sided Jacobi SVD of a square matrix: returns `W = U S` (columns
/// `s_i u_i`), the singular values `s` and `V`. Columns of `W` are rotated
/// until mutually orthogonal, which keeps small singular values accurate.
fn jacobi_svd(mut w: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let m = w.ncols();
    let mut v = DMatrix::<f64>::identity(m, m);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for k in 0..mat.nrows() {
                        let xp = mat[(k, p)];
                        let xq = mat[(k, q)];
                        mat[(k, p)] = c * xp - sn * xq;
                        mat[(k, q)] = sn * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = (0..m).map(|i| w.column(i).norm()).collect();
    (w, s, v)
}

/// Root `λ > 0` of `Σ g_i² / (s_i² + λ)² = radius_sq`, given that the left
/// side exceeds `radius_sq` at `λ = 0`. Newton on `1/‖a(λ)‖ − 1/r`, kept
/// inside a shrinking bisection bracket.
fn secular_root(g: &[f64], s: &[f64], keep: &[bool], radius_sq: f64) -> f64 {
    let radius = radius_sq.sqrt();
    let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0, g_norm / radius);
    let eval = |lambda: f64| -> (f64, f64) {
        let mut n2 = 0.0;
        let mut d = 0.0;
        for i in 0..g.len() {
            if keep[i] {
                let den = s[i] * s[i] + lambda;
                let q = g[i] * g[i] / (den * den);
                n2 += q;
                d += q / den;
            }
        }
        (n2, d)
    };
    let mut lambda = 0.0;
    for _ in 0..SECULAR_MAX_ITER {
        let (n2, d) = eval(lambda);
        if (n2 - radius_sq).abs() <= SECULAR_TOL * radius_sq {
            break;
        }
        if n2 > radius_sq {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let norm = n2.sqrt();
        let psi = 1.0 / norm - 1.0 / radius;
        let dpsi = d / (norm * n2);
        let newton = lambda - psi / dpsi;
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // the caller rescales onto the ball if we stopped just outside it
    lambda
}

/// Ball-constrained least squares on an explicit design matrix.
pub fn fit_ridge(f: &DMatrix<f64>, u: &ResponseVector, m: usize, level: f64) -> Result<RidgeSolution> {
    if f.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: f.ncols(),
        });
    }
    if f.nrows() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: f.nrows(),
            got: u.len(),
        });
    }
    check_level(level)?;
    let mut acc = LeastSquaresAccumulator::new(m);
    let mut row = vec![0.0; m];
    for (i, &target) in u.as_slice().iter().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = f[(i, c)];
        }
        acc.push_row(0, &row, target)?;
    }
    let mut sol = acc.solve_ball(m as f64 * level)?;
    sol.rows = acc.rows();
    Ok(sol)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "constraint level L must be positive and finite (got {level})"
        )));
    }
    Ok(())
}

/// Fits `spec` to a sample without forming the design matrix.
pub fn fit_basis(spec: &BasisSpec, sample: &PathSample, u: &ResponseVector, level: f64) -> Result<RidgeFit> {
    if u.len() != sample.num_design_points() {
        return Err(Error::DimensionMismatch {
            expected: sample.num_design_points(),
            got: u.len(),
        });
    }
    check_level(level)?;
    let m = spec.dim();
    let width = spec.local_width();
    let mut acc = LeastSquaresAccumulator::new(m);
    let mut buf = vec![0.0; width.max(MAX_DEGREE + 1)];
    for (x, &target) in sample.design_points().zip(u.as_slice()) {
        match spec.eval_local(x, &mut buf[..width]) {
            Some(offset) => acc.push_row(offset, &buf[..width], target)?,
            None => acc.push_row(0, &[], target)?,
        }
    }
    let mut solution = acc.solve_ball(m as f64 * level)?;
    solution.rows = acc.rows();
    Ok(RidgeFit {
        basis: spec.clone(),
        level,
        solution,
    })
}

/// One fit per grid value, in grid order. A failure names the grid value.
pub fn fit_grid(
    plan: &BasisPlan,
    grid: &DimensionGrid,
    sample: &PathSample,
    u: &ResponseVector,
    level: f64,
) -> Result<Vec<RidgeFit>> {
    grid.values()
        .par_iter()
        .map(|&size| {
            plan.spec(size)
                .and_then(|spec| fit_basis(&spec, sample, u, level))
                .map_err(|e| Error::at_dimension(size, e))
        })
        .collect()
}

/// A fitted coefficient vector together with its basis and constraint level.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub basis: BasisSpec,
    /// The constraint level `L`; the ball radius is `m·L`.
    pub level: f64,
    pub solution: RidgeSolution,
}

impl RidgeFit {
    pub fn coeffs(&self) -> &[f64] {
        &self.solution.coeffs
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Least-squares contrast of the (untruncated) fit on its training sample.
    pub fn contrast(&self) -> f64 {
        self.solution.objective / self.solution.rows as f64
    }

    /// The fitted function, capped above at `√L`.
    pub fn estimator(&self) -> EstimatorFn<'_> {
        EstimatorFn {
            fit: self,
            cap: Some(self.level.sqrt()),
        }
    }

    /// The fitted function without the cap.
    pub fn raw_estimator(&self) -> EstimatorFn<'_> {
        EstimatorFn { fit: self, cap: None }
    }

    pub fn record(&self) -> RidgeFitRecord {
        let (segments, degree) = match self.basis.family() {
            BasisFamily::Bspline { segments, degree } => (Some(segments), Some(degree)),
            _ => (None, None),
        };
        RidgeFitRecord {
            family: self.basis.family().kind(),
            interval: self.basis.interval(),
            m: self.dim(),
            k: segments,
            degree,
            level: self.level,
            coeffs: self.solution.coeffs.clone(),
            lagrange: self.solution.lagrange,
            active: self.solution.active,
        }
    }
}

/// JSON shape of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeFitRecord {
    pub family: FamilyKind,
    pub interval: Interval,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "M")]
    pub degree: Option<usize>,
    #[serde(rename = "L")]
    pub level: f64,
    pub coeffs: Vec<f64>,
    pub lagrange: f64,
    pub active: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct EstimatorFn<'a> {
    fit: &'a RidgeFit,
    cap: Option<f64>,
}

impl EstimatorFn<'_> {
    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn raw(&self, x: f64) -> f64 {
        let spec = &self.fit.basis;
        let width = spec.local_width();
        let mut small = [0.0; MAX_DEGREE + 1];
        let mut large;
        let buf: &mut [f64] = if width <= small.len() {
            &mut small[..width]
        } else {
            large = vec![0.0; width];
            &mut large
        };
        match spec.eval_local(x, buf) {
            Some(offset) => buf
                .iter()
                .zip(&self.fit.solution.coeffs[offset..offset + width])
                .map(|(b, a)| b * a)
                .sum(),
            None => 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        truncate(self.raw(x), self.cap)
    }
}

pub fn evaluate(est: &EstimatorFn<'_>, x: f64) -> f64 {
    est.eval(x)
}

/// `min(value, cap)`; no lower clamp.
pub fn truncate(value: f64, cap: Option<f64>) -> f64 {
    match cap {
        Some(c) if value > c => c,
        _ => value,
    }
}

/// How the constraint level `L` is derived from `(N, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum LevelRule {
    Fixed(f64),
    /// `log n`
    LogSmallN,
    /// `log² n`
    LogSqSmallN,
    /// `√log n`
    SqrtLogSmallN,
    /// `log N`
    LogBigN,
    /// `log² N`
    LogSqBigN,
    /// `log(N n)`
    LogNn,
}

impl LevelRule {
    pub fn resolve(self, num_paths: usize, n: usize) -> Result<f64> {
        let ln = (n as f64).ln();
        let lbig = (num_paths as f64).ln();
        let level = match self {
            LevelRule::Fixed(v) => v,
            LevelRule::LogSmallN => ln,
            LevelRule::LogSqSmallN => ln * ln,
            LevelRule::SqrtLogSmallN => ln.max(0.0).sqrt(),
            LevelRule::LogBigN => lbig,
            LevelRule::LogSqBigN => lbig * lbig,
            LevelRule::LogNn => ((num_paths * n) as f64).ln(),
        };
        check_level(level).map_err(|_| {
            Error::InvalidParameter(format!(
                "level rule {self:?} gives L = {level} for N = {num_paths}, n = {n}; L must be positive"
            ))
        })?;
        Ok(level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::DiffusionPath;
    use approx::assert_abs_diff_eq;

    fn response(v: &[f64]) -> ResponseVector {
        ResponseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn response_of_two_point_path() {
        let p = DiffusionPath::new(vec![0.0, 0.1]).unwrap();
        let s = PathSample::new(vec![p], 0).unwrap();
        let u = build_response(&s);
        assert_eq!(u.len(), 1);
        assert_abs_diff_eq!(u.as_slice()[0], 0.01, epsilon = 1e-15);

        let flat = DiffusionPath::new(vec![0.3; 11]).unwrap();
        let s = PathSample::new(vec![flat.clone(), flat], 0).unwrap();
        let u = build_response(&s);
        assert_eq!(u.len(), 20);
        assert!(u.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contrast_examples() {
        let u = response(&[1.0, 1.0]);
        assert_eq!(contrast(&[0.0, 0.0], &u).unwrap(), 1.0);
        assert_eq!(contrast(&[1.0, 1.0], &u).unwrap(), 0.0);
        assert!(matches!(contrast(&[1.0], &u), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn identity_interior_solution() {
        let f = DMatrix::identity(2, 2);
        let sol = fit_ridge(&f, &response(&[0.5, 0.5]), 2, 2.0).unwrap();
        assert_abs_diff_eq!(sol.coeffs[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.coeffs[1], 0.5, epsilon = 1e-14);
        assert_eq!(sol.lagrange, 0.0);
        assert!(!sol.active);
    }

    #[test]
    fn identity_projection_onto_ball() {
        let f = DMatrix::identity(2, 2);
        let sol = fit_ridge(&f, &response(&[3.0, 4.0]), 2, 2.0).unwrap();
        assert_abs_diff_eq!(sol.coeffs[0], 1.2, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.coeffs[1], 1.6, epsilon = 1e-9);
        assert!(sol.active);
        // λ solves 5/(1+λ) = 2
        assert_abs_diff_eq!(sol.lagrange, 1.5, epsilon = 1e-8);
        assert!((sol.norm_sq() - 4.0).abs() <= 1e-6 * 4.0);
    }

    #[test]
    fn duplicated_column_gives_min_norm() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5]);
        let sol = fit_ridge(&f, &response(&[1.0, 3.0, 0.2]), 2, 100.0).unwrap();
        // min-norm solution splits the single coefficient equally
        assert_abs_diff_eq!(sol.coeffs[0], sol.coeffs[1], epsilon = 1e-12);
        let beta = (1.0 + 6.0 + 0.1) / (1.0 + 4.0 + 0.25);
        assert_abs_diff_eq!(sol.coeffs[0], beta / 2.0, epsilon = 1e-12);
        assert!(!sol.active);
    }

    #[test]
    fn input_validation() {
        let f = DMatrix::identity(2, 2);
        assert!(matches!(
            fit_ridge(&f, &response(&[1.0]), 2, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fit_ridge(&f, &response(&[1.0, 1.0]), 3, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = f.clone();
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(fit_ridge(&bad, &response(&[1.0, 1.0]), 2, 1.0), Err(Error::NonFiniteInput)));
        assert!(fit_ridge(&f, &response(&[1.0, 1.0]), 2, 0.0).is_err());
        assert!(ResponseVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn zero_design_gives_zero_coefficients() {
        let f = DMatrix::zeros(4, 3);
        let sol = fit_ridge(&f, &response(&[1.0, 2.0, 3.0, 4.0]), 3, 1.0).unwrap();
        assert!(sol.coeffs.iter().all(|&a| a == 0.0));
        assert_abs_diff_eq!(sol.objective, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_matches_direct_residual() {
        let f = DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin());
        let u = response(&(0..12).map(|i| (i as f64 * 0.3).cos().abs() * 3.0).collect::<Vec<_>>());
        for level in [0.01, 0.1, 10.0] {
            let sol = fit_ridge(&f, &u, 3, level).unwrap();
            let a = DVector::from_column_slice(&sol.coeffs);
            let direct = (DVector::from_column_slice(u.as_slice()) - &f * a).norm_squared();
            assert_abs_diff_eq!(sol.objective, direct, epsilon = 1e-10 * direct.max(1.0));
            assert!(sol.norm_sq() <= 3.0 * level * (1.0 + 1e-8));
        }
    }

    #[test]
    fn banded_accumulation_matches_dense() {
        let spec = BasisSpec::bspline(-1.0, 1.0, 8, 3).unwrap();
        let paths = (0..3)
            .map(|j| DiffusionPath::new((0..=60).map(|k| ((j * 61 + k) as f64 * 0.23).sin() * 0.95).collect()).unwrap())
            .collect();
        let sample = PathSample::new(paths, 0).unwrap();
        let u = build_response(&sample);
        let banded = fit_basis(&spec, &sample, &u, 3.0).unwrap();
        let dense = fit_ridge(&crate::bases::design_matrix(&spec, &sample), &u, spec.dim(), 3.0).unwrap();
        for (x, y) in banded.coeffs().iter().zip(&dense.coeffs) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(banded.solution.objective, dense.objective, epsilon = 1e-9);
        assert_eq!(banded.solution.rows, 180);
    }

    #[test]
    fn truncation_and_constants() {
        assert_eq!(truncate(10.0, Some(2.0)), 2.0);
        assert_eq!(truncate(1.5, Some(2.0)), 1.5);
        assert_eq!(truncate(-3.0, Some(2.0)), -3.0);
        assert_eq!(truncate(10.0, None), 10.0);

        let basis = BasisSpec::bspline(-1.0, 1.0, 4, 3).unwrap();
        let fit = RidgeFit {
            basis,
            level: 4.0,
            solution: RidgeSolution {
                coeffs: vec![0.7; 7],
                lagrange: 0.0,
                active: false,
                radius_sq: 28.0,
                objective: 0.0,
                rows: 1,
            },
        };
        for x in [-1.0, -0.33, 0.0, 0.5, 1.0] {
            assert_abs_diff_eq!(evaluate(&fit.estimator(), x), 0.7, epsilon = 1e-14);
        }
        assert_eq!(fit.estimator().eval(2.0), 0.0);

        let mut big = fit.clone();
        big.solution.coeffs = vec![10.0; 7];
        assert_eq!(big.estimator().eval(0.1), 2.0);
        assert_abs_diff_eq!(big.raw_estimator().eval(0.1), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn record_json_fields() {
        let basis = BasisSpec::bspline(-1.0, 1.0, 2, 3).unwrap();
        let fit = RidgeFit {
            basis,
            level: 1.5,
            solution: RidgeSolution {
                coeffs: vec![0.0; 5],
                lagrange: 0.0,
                active: false,
                radius_sq: 7.5,
                objective: 0.0,
                rows: 1,
            },
        };
        let json = serde_json::to_string(&fit.record()).unwrap();
        for key in ["\"family\"", "\"interval\"", "\"m\"", "\"K\"", "\"M\"", "\"L\"", "\"coeffs\"", "\"lagrange\"", "\"active\""] {
            assert!(json.contains(key), "{key} missing from {json}");
        }
        let back: RidgeFitRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fit.record());
    }

    #[test]
    fn level_rules() {
        assert_abs_diff_eq!(LevelRule::LogNn.resolve(100, 100).unwrap(), (1e4f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(LevelRule::LogSqBigN.resolve(100, 7).unwrap(), 100f64.ln().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(LevelRule::SqrtLogSmallN.resolve(1, 1000).unwrap(), 1000f64.ln().sqrt(), epsilon = 1e-12);
        assert!(LevelRule::LogBigN.resolve(1, 1000).is_err());
        assert!(LevelRule::Fixed(-1.0).resolve(1, 1).is_err());
    }
}
