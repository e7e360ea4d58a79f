//! Oracles shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sigma_ridge::regression::{fit_ridge, ResponseVector};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Normalized Hermite functions by the recurrence, independent of the library.
pub fn hermite_fns(x: f64, count: usize) -> Vec<f64> {
    let mut h = vec![0.0; count];
    h[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if count > 1 {
        h[1] = 2f64.sqrt() * x * h[0];
    }
    for j in 1..count.saturating_sub(1) {
        let jf = j as f64;
        h[j + 1] = (2.0 / (jf + 1.0)).sqrt() * x * h[j] - (jf / (jf + 1.0)).sqrt() * h[j - 1];
    }
    h
}

/// Gauss–Hermite nodes by Golub–Welsch, polished by Newton on `h_n`.
/// Returns nodes and weights times `e^{x²}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().cloned().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_fns(*x, n + 1);
            // h_n' = √(2n) h_{n−1} − x h_n
            let d = (2.0 * n as f64).sqrt() * h[n - 1] - *x * h[n];
            *x -= h[n] / d;
        }
        let h = hermite_fns(*x, n);
        weights.push(1.0 / (n as f64 * h[n - 1] * h[n - 1]));
    }
    (nodes, weights)
}

/// A random design: dense Gaussian, sparse, or with repeated columns.
pub fn random_problem(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, ResponseVector, usize, f64) {
    let m = rng.random_range(1..=8);
    let rows = rng.random_range(1..=30);
    let style = rng.random_range(0..3);
    let mut f = DMatrix::from_fn(rows, m, |_, _| normal(rng) * 3.0);
    if style == 1 {
        f.iter_mut().for_each(|v| {
            if rng.random::<f64>() < 0.6 {
                *v = 0.0
            }
        });
    } else if style == 2 && m > 1 {
        let src = f.column(0).clone_owned();
        f.set_column(m - 1, &src);
    }
    let u = ResponseVector::new((0..rows).map(|_| rng.random::<f64>() * 5.0).collect()).unwrap();
    let level = 10f64.powf(rng.random_range(-3.0..1.5));
    (f, u, m, level)
}

/// Minimum of `‖u − F a‖²` over a 0.01 grid of the ball; the last coordinate
/// is minimized exactly over its feasible segment.
pub fn ball_grid_minimum(f: &DMatrix<f64>, u: &[f64], radius_sq: f64) -> f64 {
    let m = f.ncols();
    let g = f.transpose() * f;
    let uu = DVector::from_column_slice(u);
    let h = f.transpose() * &uu;
    let c = uu.norm_squared();
    let obj = |a: &DVector<f64>| (a.transpose() * &g * a)[0] - 2.0 * a.dot(&h) + c;
    let radius = radius_sq.sqrt();
    let steps = (radius / 0.01).floor() as i64;
    let coords: Vec<f64> = (-steps..=steps).map(|i| i as f64 * 0.01).collect();
    let mut best = f64::INFINITY;
    let mut a = DVector::zeros(m);
    let mut visit = |a: &mut DVector<f64>, used: f64| {
        let last = m - 1;
        let room = (radius_sq - used).max(0.0).sqrt();
        // objective in the last coordinate t: g_ll t² + 2 t (Σ_{i≠l} g_il a_i − h_l) + const
        a[last] = 0.0;
        let lin = (g.row(last) * &*a)[0] - h[last];
        let t = if g[(last, last)] > 0.0 { -lin / g[(last, last)] } else if lin > 0.0 { -room } else { room };
        for cand in [t.clamp(-room, room), -room, room] {
            a[last] = cand;
            best = best.min(obj(a));
        }
    };
    match m {
        1 => visit(&mut a, 0.0),
        2 => {
            for &x in &coords {
                a[0] = x;
                visit(&mut a, x * x);
            }
        }
        3 => {
            for &x in &coords {
                for &y in &coords {
                    if x * x + y * y > radius_sq {
                        continue;
                    }
                    a[0] = x;
                    a[1] = y;
                    visit(&mut a, x * x + y * y);
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

/// Checks feasibility and the KKT conditions of one ridge fit.
pub fn check_kkt(f: &DMatrix<f64>, u: &ResponseVector, m: usize, level: f64) -> Result<bool, String> {
    let sol = fit_ridge(f, u, m, level).map_err(|e| e.to_string())?;
    let r2 = m as f64 * level;
    let a = DVector::from_vec(sol.coeffs.clone());
    let norm2 = a.norm_squared();
    if norm2 > r2 * (1.0 + 1e-8) {
        return Err(format!("‖a‖² = {norm2} > mL = {r2}"));
    }
    if sol.active != (sol.lagrange > 0.0) {
        return Err("active flag disagrees with λ".into());
    }
    let uu = DVector::from_column_slice(u.as_slice());
    let ftu = f.transpose() * &uu;
    let gram = f.transpose() * f;
    let scale = ftu.norm() + gram.norm() * a.norm() + 1e-300;
    if sol.active {
        if (norm2 - r2).abs() > 1e-6 * r2 {
            return Err(format!("active but ‖a‖² = {norm2}, mL = {r2}"));
        }
        // stationarity (FᵀF + λI) a = Fᵀu
        let resid = (&gram * &a + &a * sol.lagrange - &ftu).norm();
        if resid > 1e-8 * (scale + sol.lagrange * a.norm()) {
            return Err(format!("stationarity residual {resid}"));
        }
    } else {
        let resid = (&gram * &a - &ftu).norm();
        if resid > 1e-8 * scale {
            return Err(format!("normal equations residual {resid}"));
        }
    }
    Ok(sol.active)
}
