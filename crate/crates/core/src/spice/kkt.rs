use nalgebra::{DMatrix, DVector};

use super::SqrtLassoProblem;
use crate::error::{Error, Result};

/// Residual norms at or below this fraction of `‖y‖` count as interpolation.
const INTERPOLATION_RTOL: f64 = 1e-9;

fn check_len(problem: &SqrtLassoProblem, theta: &[f64]) -> Result<()> {
    if theta.len() != problem.cols() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, problem has {} columns",
            theta.len(),
            problem.cols()
        )));
    }
    Ok(())
}

/// `‖y − Aθ‖₂ + Σ λ_m |θ_m|`.
pub fn sqrt_lasso_objective(problem: &SqrtLassoProblem, theta: &[f64]) -> Result<f64> {
    check_len(problem, theta)?;
    let th = DVector::from_column_slice(theta);
    let r = &problem.y - &problem.a * &th;
    Ok(r.norm() + problem.lambda.iter().zip(theta).map(|(l, t)| l * t.abs()).sum::<f64>())
}

/// Largest violation of the subgradient optimality conditions.
///
/// With `u = r / ‖r‖`, `r = y − Aθ`, a nonzero tap must satisfy
/// `a_mᵀu = λ_m sign(θ_m)` and a zero tap `|a_mᵀu| ≤ λ_m`. When the residual
/// vanishes the conditions involve any `u` in the unit ball; the minimum-norm
/// certificate on the support is tried and [`Error::Interpolation`] is
/// returned when it does not settle optimality.
pub fn kkt_residual(problem: &SqrtLassoProblem, theta: &[f64]) -> Result<f64> {
    check_len(problem, theta)?;
    let th = DVector::from_column_slice(theta);
    let r = &problem.y - &problem.a * &th;
    let rnorm = r.norm();
    if rnorm <= INTERPOLATION_RTOL * problem.y.norm() {
        return interpolation_certificate(problem, theta);
    }
    let corr = problem.a.tr_mul(&r) / rnorm;
    Ok(violation(&corr, &problem.lambda, theta))
}

fn violation(corr: &DVector<f64>, lambda: &DVector<f64>, theta: &[f64]) -> f64 {
    corr.iter()
        .zip(lambda.iter())
        .zip(theta)
        .map(|((g, l), t)| {
            if *t != 0.0 {
                (g - l * t.signum()).abs()
            } else {
                (g.abs() - l).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn interpolation_certificate(problem: &SqrtLassoProblem, theta: &[f64]) -> Result<f64> {
    let support: Vec<usize> = (0..theta.len()).filter(|&m| theta[m] != 0.0).collect();
    let n = problem.rows();
    if support.is_empty() {
        // u = 0 certifies θ = 0 whenever y = Aθ = 0.
        return Ok(0.0);
    }
    let a_s = problem.a.select_columns(support.iter());
    let target = DVector::from_iterator(
        support.len(),
        support.iter().map(|&m| problem.lambda[m] * theta[m].signum()),
    );
    // Minimum-norm u with A_Sᵀ u = Λ_S s.
    let svd = a_s.transpose().svd(true, true);
    let u = match svd.solve(&target, 1e-12) {
        Ok(u) => u,
        Err(_) => {
            return Err(Error::Interpolation {
                certificate_residual: f64::MAX,
            })
        }
    };
    let consistency = (a_s.tr_mul(&u) - &target).amax();
    let corr = problem.a.tr_mul(&u);
    let off = (0..theta.len())
        .filter(|&m| theta[m] == 0.0)
        .map(|m| (corr[m].abs() - problem.lambda[m]).max(0.0))
        .fold(0.0, f64::max);
    let residual = consistency.max(off).max((u.norm() - 1.0).max(0.0));
    let unique = support.len() == n && is_invertible(&a_s);
    if unique || residual <= 1e-12 {
        Ok(residual)
    } else {
        Err(Error::Interpolation {
            certificate_residual: residual,
        })
    }
}

fn is_invertible(m: &DMatrix<f64>) -> bool {
    m.is_square() && m.clone().lu().try_inverse().is_some()
}
