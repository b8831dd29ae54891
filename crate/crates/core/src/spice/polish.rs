//! Refinement of a SPICE iterate to an exact square-root LASSO optimum.
//!
//! SPICE powers of inactive taps decay only geometrically, so its iterate is
//! dense. Two steps finish the job: coordinate descent (closed-form
//! one-dimensional minimizers) sets exact zeros, and once the support and
//! signs are right the face solution below is exact. When descent stalls the
//! LASSO path gives the optimum directly.

use nalgebra::{DMatrix, DVector};

use super::homotopy::path_solution;
use super::kkt::{kkt_residual, sqrt_lasso_objective};
use super::SqrtLassoProblem;

pub(crate) struct Refined {
    pub theta: Vec<f64>,
    pub passes: usize,
}

fn kkt_or_inf(problem: &SqrtLassoProblem, theta: &[f64]) -> f64 {
    kkt_residual(problem, theta).unwrap_or(f64::INFINITY)
}

pub(crate) fn refine(problem: &SqrtLassoProblem, start: &[f64], tol: f64, max_passes: usize) -> Refined {
    let m = problem.cols();
    let mut theta: Vec<f64> = start
        .iter()
        .zip(problem.lambda.iter())
        .map(|(t, l)| if *l > 0.0 && t.is_finite() { *t } else { 0.0 })
        .collect();

    // The SPICE support is usually already right.
    let peak = theta.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    if peak > 0.0 {
        let support: Vec<usize> = (0..m).filter(|&i| theta[i].abs() > 1e-6 * peak).collect();
        if let Some(face) = face_solution(problem, &support, &signs_of(&theta, &support)) {
            if kkt_or_inf(problem, &face) <= tol {
                return Refined { theta: face, passes: 0 };
            }
        }
    }

    let mut best = theta.clone();
    let mut best_obj = sqrt_lasso_objective(problem, &best).unwrap_or(f64::INFINITY);
    let mut cd = CoordinateDescent::new(problem, &theta);
    for pass in 1..=max_passes {
        cd.pass(problem);
        theta.copy_from_slice(cd.theta.as_slice());
        let obj = sqrt_lasso_objective(problem, &theta).unwrap_or(f64::INFINITY);
        if obj <= best_obj {
            best_obj = obj;
            best.copy_from_slice(&theta);
        }
        if kkt_or_inf(problem, &theta) <= tol {
            return Refined { theta, passes: pass };
        }
        if pass % 5 == 0 {
            let support: Vec<usize> = (0..m).filter(|&i| theta[i] != 0.0).collect();
            if let Some(face) = face_solution(problem, &support, &signs_of(&theta, &support)) {
                let face_obj = sqrt_lasso_objective(problem, &face).unwrap_or(f64::INFINITY);
                if kkt_or_inf(problem, &face) <= tol {
                    return Refined { theta: face, passes: pass };
                }
                if face_obj < obj {
                    cd = CoordinateDescent::new(problem, &face);
                }
            }
        }
    }
    // Strongly correlated columns stall coordinate descent; the path is exact.
    if let Some(path) = path_solution(problem) {
        let path_obj = sqrt_lasso_objective(problem, &path).unwrap_or(f64::INFINITY);
        if kkt_or_inf(problem, &path) <= tol || path_obj < best_obj {
            best = path;
        }
    }
    Refined {
        theta: best,
        passes: max_passes,
    }
}

fn signs_of(theta: &[f64], support: &[usize]) -> Vec<f64> {
    support.iter().map(|&i| theta[i].signum()).collect()
}

/// Minimizer of `‖y − A_S θ_S‖ + Σ_S λ_m s_m θ_m` over the span of the support.
///
/// Stationarity gives `θ_S = θ_LS − t G⁻¹Λs` with `G = A_SᵀA_S` and
/// `t = ‖r‖ = ‖r_LS‖ / √(1 − sᵀΛG⁻¹Λs)`. Returns `None` when that
/// quadratic form is not below one, `G` is singular, or the signs disagree.
pub(crate) fn face_solution(problem: &SqrtLassoProblem, support: &[usize], signs: &[f64]) -> Option<Vec<f64>> {
    let m = problem.cols();
    if support.is_empty() {
        return Some(vec![0.0; m]);
    }
    let a_s: DMatrix<f64> = problem.a.select_columns(support.iter());
    let chol = a_s.tr_mul(&a_s).cholesky()?;
    let theta_ls = chol.solve(&a_s.tr_mul(&problem.y));
    let r_ls = &problem.y - &a_s * &theta_ls;
    let weighted = DVector::from_iterator(
        support.len(),
        support.iter().zip(signs).map(|(&i, s)| problem.lambda[i] * s),
    );
    let z = chol.solve(&weighted);
    let form = weighted.dot(&z);
    if !(form < 1.0) {
        return None;
    }
    let t = r_ls.norm() / (1.0 - form).sqrt();
    let theta_s = theta_ls - z * t;
    let mut theta = vec![0.0; m];
    for ((&i, s), v) in support.iter().zip(signs).zip(theta_s.iter()) {
        if v.signum() != *s || *v == 0.0 || !v.is_finite() {
            return None;
        }
        theta[i] = *v;
    }
    Some(theta)
}

struct CoordinateDescent {
    theta: DVector<f64>,
    residual: DVector<f64>,
    col_norm2: Vec<f64>,
}

impl CoordinateDescent {
    fn new(problem: &SqrtLassoProblem, theta: &[f64]) -> Self {
        let theta = DVector::from_column_slice(theta);
        let residual = &problem.y - &problem.a * &theta;
        let col_norm2 = problem.a.column_iter().map(|c| c.norm_squared()).collect();
        Self {
            theta,
            residual,
            col_norm2,
        }
    }

    fn pass(&mut self, problem: &SqrtLassoProblem) {
        for m in 0..problem.cols() {
            let lambda = problem.lambda[m];
            let alpha = self.col_norm2[m];
            if alpha == 0.0 {
                continue;
            }
            let col = problem.a.column(m);
            let old = self.theta[m];
            if old != 0.0 {
                self.residual.axpy(old, &col, 1.0);
            }
            let beta = col.dot(&self.residual);
            let gamma = self.residual.norm_squared();
            let new = coordinate_minimizer(alpha, beta, gamma, lambda);
            if new != 0.0 {
                self.residual.axpy(-new, &col, 1.0);
            }
            self.theta[m] = new;
        }
    }
}

/// `argmin_t √(γ − 2βt + αt²) + λ|t|`, the residual norm along one column.
fn coordinate_minimizer(alpha: f64, beta: f64, gamma: f64, lambda: f64) -> f64 {
    if beta.abs() <= lambda * gamma.sqrt() {
        return 0.0;
    }
    let slack = alpha - lambda * lambda;
    if slack <= 1e-14 * alpha {
        // Objective is flat between 0 and β/α.
        return 0.0;
    }
    let orth = (gamma - beta * beta / alpha).max(0.0);
    let shrink = lambda * (orth / (alpha * slack)).sqrt();
    beta / alpha - beta.signum() * shrink
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_minimizer_matches_grid() {
        for &(alpha, beta, gamma, lambda) in &[
            (4.0, 3.0, 5.0, 0.5),
            (2.0, -1.5, 2.0, 0.3),
            (1.0, 0.2, 1.0, 0.5),
            (9.0, 8.0, 9.0, 1.0),
        ] {
            let f = |t: f64| (gamma - 2.0 * beta * t + alpha * t * t).max(0.0).sqrt() + lambda * t.abs();
            let t_star = coordinate_minimizer(alpha, beta, gamma, lambda);
            let grid_best = (0..=400_000)
                .map(|k| -2.0 + 4.0 * k as f64 / 400_000.0)
                .map(f)
                .fold(f64::INFINITY, f64::min);
            assert!(f(t_star) <= grid_best + 1e-9, "{alpha} {beta} {gamma} {lambda}");
        }
    }
}
