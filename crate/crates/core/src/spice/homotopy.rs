//! Exact square-root LASSO solution by following the weighted LASSO path.
//!
//! `θ̂` minimizes `‖y − Aθ‖ + Σ λ_m |θ_m|` exactly when it minimizes
//! `½‖y − Aθ‖² + t Σ λ_m |θ_m|` at `t = ‖y − Aθ̂‖`. On each piece of the path
//! the active taps move affinely, `θ_S(t) = u − t v`, and the residual
//! `r(t) = r₀ + t q` has `r₀ ⟂ q`, so `t = ‖r(t)‖` has the closed-form root
//! `t = ‖r₀‖ / √(1 − ‖q‖²)`. The path is walked down from the smallest `t`
//! that keeps `θ = 0` until that root falls inside the current piece.

use nalgebra::{DMatrix, DVector};

use super::SqrtLassoProblem;

enum Event {
    Join(usize, f64),
    Drop(usize),
}

pub(crate) fn path_solution(problem: &SqrtLassoProblem) -> Option<Vec<f64>> {
    let m = problem.cols();
    let (a, y, lambda) = (&problem.a, &problem.y, &problem.lambda);
    let corr = a.tr_mul(y);
    let mut t = 0.0;
    let mut first = None;
    for i in 0..m {
        if lambda[i] > 0.0 && corr[i].abs() / lambda[i] > t {
            t = corr[i].abs() / lambda[i];
            first = Some(i);
        }
    }
    let first = match first {
        Some(i) if t > y.norm() => i,
        _ => return Some(vec![0.0; m]),
    };
    let mut active = vec![first];
    let mut signs = vec![corr[first].signum()];
    // The tap that changed at the last event sits exactly on its boundary.
    let mut last = Some(first);

    for _ in 0..(10 * m + 10) {
        let a_s: DMatrix<f64> = a.select_columns(active.iter());
        let chol = a_s.tr_mul(&a_s).cholesky()?;
        let u = chol.solve(&a_s.tr_mul(y));
        let weighted = DVector::from_iterator(active.len(), active.iter().zip(&signs).map(|(&i, s)| lambda[i] * s));
        let v = chol.solve(&weighted);
        let r0 = y - &a_s * &u;
        let q = &a_s * &v;
        let at = |t: f64| {
            let mut theta = vec![0.0; m];
            for (k, &i) in active.iter().enumerate() {
                theta[i] = u[k] - t * v[k];
            }
            theta
        };

        let below = t * (1.0 - 1e-12);
        let mut t_next = 0.0;
        let mut event = None;
        for j in 0..m {
            if lambda[j] == 0.0 || active.contains(&j) || last == Some(j) {
                continue;
            }
            let (c0, cq) = (a.column(j).dot(&r0), a.column(j).dot(&q));
            for sigma in [1.0, -1.0] {
                let denom = sigma * lambda[j] - cq;
                if denom == 0.0 {
                    continue;
                }
                let tj = c0 / denom;
                if tj > t_next && tj < below {
                    t_next = tj;
                    event = Some(Event::Join(j, sigma));
                }
            }
        }
        for (k, &i) in active.iter().enumerate() {
            if v[k] != 0.0 && last != Some(i) {
                let tk = u[k] / v[k];
                if tk > t_next && tk < below {
                    t_next = tk;
                    event = Some(Event::Drop(i));
                }
            }
        }

        let q2 = q.norm_squared();
        if q2 < 1.0 {
            let root = r0.norm() / (1.0 - q2).sqrt();
            if root >= t_next && root <= t * (1.0 + 1e-9) {
                return Some(at(root));
            }
        }
        match event {
            // The path ends at t = 0 without meeting the root: interpolation.
            None => return Some(at(0.0)),
            Some(Event::Join(j, sigma)) => {
                last = Some(j);
                active.push(j);
                signs.push(sigma);
            }
            Some(Event::Drop(i)) => {
                last = Some(i);
                let k = active.iter().position(|&x| x == i)?;
                active.remove(k);
                signs.remove(k);
                if active.is_empty() {
                    return Some(vec![0.0; m]);
                }
            }
        }
        t = t_next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spice::{kkt_residual, LambdaScale};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_column_closed_form() {
        // ‖y − aθ‖ + λ|θ| with a = (1, 0), y = (2, 1), λ = 1/√2: optimum at θ = 1.
        let p = SqrtLassoProblem {
            a: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            y: DVector::from_column_slice(&[2.0, 1.0]),
            lambda: DVector::from_element(1, 0.5f64.sqrt()),
        };
        let theta = path_solution(&p).unwrap();
        assert!((theta[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn satisfies_kkt_on_correlated_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let (n, m) = (rng.random_range(10..60), rng.random_range(3..20));
            let base: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = DMatrix::from_fn(n, m, |i, _| base[i] + 0.05 * rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(n, |i, _| 3.0 * base[i] + 0.3 * rng.random_range(-1.0..1.0));
            let p = SqrtLassoProblem::new(a, y, LambdaScale::InvSqrtN).unwrap();
            let theta = path_solution(&p).unwrap();
            if n > m {
                let k = kkt_residual(&p, &theta).unwrap();
                assert!(k < 1e-8, "{n} {m} {k} {theta:?}");
            }
        }
    }
}
