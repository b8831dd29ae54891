#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use netspice::netmodel::RegressionProblem;

/// Gaussian design with a sparse coefficient vector and additive noise.
pub fn random_problem(rows: usize, cols: usize, support: usize, noise: f64, seed: u64) -> RegressionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut theta = DVector::zeros(cols);
    for idx in rand::seq::index::sample(&mut rng, cols, support.min(cols)) {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        theta[idx] = sign * rng.random_range(0.5..1.5);
    }
    let e = DVector::from_fn(rows, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
    let y = &a * &theta + e;
    RegressionProblem { y, a, node: 0, lags: cols, t0: 0 }
}

pub fn weights(p: &RegressionProblem) -> Vec<f64> {
    let n = p.a.nrows() as f64;
    p.a.column_iter().map(|c| c.norm() / n.sqrt()).collect()
}

pub fn objective(p: &RegressionProblem, lambda: &[f64], theta: &[f64]) -> f64 {
    let r = &p.y - &p.a * DVector::from_column_slice(theta);
    r.norm() + lambda.iter().zip(theta).map(|(l, t)| l * t.abs()).sum::<f64>()
}

/// Global minimum of `‖y − Aθ‖ + Σ λ|θ|` by exhaustive search over sign
/// patterns in {−, 0, +}^M, minimizing the smooth restriction on each orthant
/// face with damped Newton steps. Exponential in M; meant for M ≤ 10.
pub fn convex_oracle(p: &RegressionProblem, lambda: &[f64]) -> (f64, Vec<f64>) {
    let m = p.a.ncols();
    let mut best = (p.y.norm(), vec![0.0; m]);
    let patterns = 3usize.pow(m as u32);
    for code in 1..patterns {
        let mut signs = vec![0.0; m];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = [0.0, 1.0, -1.0][c % 3];
            c /= 3;
        }
        if let Some(theta) = newton_on_face(p, lambda, &signs) {
            let f = objective(p, lambda, &theta);
            if f < best.0 {
                best = (f, theta);
            }
        }
    }
    best
}

fn newton_on_face(p: &RegressionProblem, lambda: &[f64], signs: &[f64]) -> Option<Vec<f64>> {
    let idx: Vec<usize> = (0..signs.len()).filter(|&i| signs[i] != 0.0).collect();
    let a = p.a.select_columns(idx.iter());
    let w = DVector::from_iterator(idx.len(), idx.iter().map(|&i| lambda[i] * signs[i]));
    let f = |x: &DVector<f64>| (&p.y - &a * x).norm() + w.dot(x);
    // Least squares start, a point where the residual is nonzero generically.
    let mut x = a.clone().svd(true, true).solve(&p.y, 1e-14).ok()?;
    x.iter_mut().zip(idx.iter()).for_each(|(v, &i)| {
        if v.signum() != signs[i] {
            *v = 1e-3 * signs[i];
        }
    });
    let gradient = |x: &DVector<f64>| {
        let r = &p.y - &a * x;
        let rn = r.norm();
        let au = a.tr_mul(&(&r / rn));
        let hess = (a.tr_mul(&a) - &au * au.transpose()) / rn;
        (-au + &w, hess, rn)
    };
    let mut fx = f(&x);
    // Damped Newton far from the minimizer, then undamped steps, which keep
    // converging after f stops resolving the progress.
    for iter in 0..300 {
        let (grad, hess, rn) = gradient(&x);
        if rn < 1e-12 || !x.iter().all(|v| v.is_finite()) || x.norm() > 1e8 {
            return None;
        }
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        if grad.norm() < 1e-6 {
            x -= step;
            if iter > 250 || grad.norm() < 1e-14 {
                break;
            }
            continue;
        }
        let mut t = 1.0;
        while t > 1e-20 {
            let cand = &x - &step * t;
            let fc = f(&cand);
            if fc < fx {
                x = cand;
                fx = fc;
                break;
            }
            t *= 0.5;
        }
        if t <= 1e-20 {
            return None;
        }
    }
    let r = &p.y - &a * &x;
    let grad = -(a.tr_mul(&(&r / r.norm()))) + &w;
    if grad.norm() > 1e-10 {
        return None;
    }
    if idx.iter().zip(x.iter()).any(|(&i, v)| v.signum() != signs[i] || *v == 0.0) {
        return None;
    }
    let mut theta = vec![0.0; signs.len()];
    for (&i, v) in idx.iter().zip(x.iter()) {
        theta[i] = *v;
    }
    Some(theta)
}
