use nalgebra::{DMatrix, DVector};

use super::SqrtLassoProblem;
use crate::error::{Error, Result};

/// Covariance-matching weights: `v_m = v₀ λ_m` for columns, `v₀` for noise.
/// Also caches `AᵀA` and `Aᵀy`, reused by every sweep.
pub(crate) struct SweepWeights {
    pub columns: Vec<f64>,
    pub noise: f64,
    gram: DMatrix<f64>,
    aty: DVector<f64>,
}

impl SweepWeights {
    pub fn new(problem: &SqrtLassoProblem, noise_weight: f64) -> Self {
        Self {
            columns: problem.lambda.iter().map(|l| l * noise_weight).collect(),
            noise: noise_weight,
            gram: problem.a.tr_mul(&problem.a),
            aty: problem.a.tr_mul(&problem.y),
        }
    }
}

pub(crate) struct SweepStep {
    pub p: Vec<f64>,
    pub sigma2: f64,
    /// Objective at the input powers.
    pub objective: f64,
}

/// Matched-filter warm start: `p_m = (a_mᵀy / ‖a_m‖²)²`, `σ² = Var(y) / 10`.
pub(crate) fn initial_powers(problem: &SqrtLassoProblem) -> (Vec<f64>, f64) {
    let aty = problem.a.tr_mul(&problem.y);
    let p = problem
        .a
        .column_iter()
        .zip(aty.iter())
        .map(|(col, c)| {
            let n2 = col.norm_squared();
            if n2 > 0.0 {
                (c / n2).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let n = problem.rows() as f64;
    let mean = problem.y.sum() / n;
    let var = problem.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let var = if var > 0.0 { var } else { problem.y.norm_squared() / n };
    (p, 0.1 * var)
}

/// `R⁻¹y` and `θ = diag(p) Aᵀ R⁻¹ y` for `R = A diag(p) Aᵀ + σ² I`.
fn covariance_solve(
    p: &[f64],
    sigma2: f64,
    problem: &SqrtLassoProblem,
    w: &SweepWeights,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (problem.rows(), problem.cols());
    if p.len() != m {
        return Err(Error::DimensionMismatch(format!("{} powers for {m} columns", p.len())));
    }
    if p.iter().any(|&v| !(v >= 0.0)) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("powers must be nonnegative".into()));
    }
    let a = &problem.a;
    if sigma2 > 0.0 && m < n {
        // Push-through identity on the M×M system:
        // θ = D (D AᵀA D + σ² I)⁻¹ D Aᵀ y with D = diag(√p), and R⁻¹y = (y − Aθ)/σ².
        let d: Vec<f64> = p.iter().map(|v| v.sqrt()).collect();
        let mut k = DMatrix::from_fn(m, m, |r, c| d[r] * w.gram[(r, c)] * d[c]);
        for r in 0..m {
            k[(r, r)] += sigma2;
        }
        let rhs = DVector::from_iterator(m, w.aty.iter().zip(&d).map(|(v, dv)| v * dv));
        let chol = k.cholesky().ok_or(Error::SingularCovariance)?;
        let u = chol.solve(&rhs);
        let theta = DVector::from_iterator(m, u.iter().zip(&d).map(|(v, dv)| v * dv));
        let z = (&problem.y - a * &theta) / sigma2;
        Ok((z, theta))
    } else {
        let mut scaled = a.clone();
        for (mut col, &pm) in scaled.column_iter_mut().zip(p) {
            col *= pm;
        }
        let mut r = &scaled * a.transpose();
        for i in 0..n {
            r[(i, i)] += sigma2;
        }
        let chol = r.cholesky().ok_or(Error::SingularCovariance)?;
        let z = chol.solve(&problem.y);
        let theta = scaled.tr_mul(&z);
        Ok((z, theta))
    }
}

/// Posterior mean `θ = diag(p) Aᵀ R⁻¹ y`.
pub fn posterior_mean(p: &[f64], sigma2: f64, problem: &SqrtLassoProblem) -> Result<DVector<f64>> {
    let w = SweepWeights::new(problem, 1.0);
    covariance_solve(p, sigma2, problem, &w).map(|(_, theta)| theta)
}

/// `yᵀR⁻¹y · (Σ v_m² p_m + v₀² σ²)`, non-increasing under [`spice_sweep`].
pub fn spice_objective(p: &[f64], sigma2: f64, problem: &SqrtLassoProblem, noise_weight: f64) -> Result<f64> {
    let w = SweepWeights::new(problem, noise_weight);
    let (z, _) = covariance_solve(p, sigma2, problem, &w)?;
    Ok(objective_from(&z, p, sigma2, problem, &w))
}

fn objective_from(z: &DVector<f64>, p: &[f64], sigma2: f64, problem: &SqrtLassoProblem, w: &SweepWeights) -> f64 {
    let mass: f64 = p.iter().zip(&w.columns).map(|(pm, v)| v * v * pm).sum::<f64>()
        + w.noise * w.noise * sigma2;
    problem.y.dot(z) * mass
}

pub(crate) fn sweep_with_objective(
    p: &[f64],
    sigma2: f64,
    problem: &SqrtLassoProblem,
    w: &SweepWeights,
) -> Result<SweepStep> {
    let (z, _) = covariance_solve(p, sigma2, problem, w)?;
    let objective = objective_from(&z, p, sigma2, problem, w);
    let corr = problem.a.tr_mul(&z);
    let c: Vec<f64> = corr.iter().map(|v| v.abs()).collect();
    let c0 = z.norm();
    let rho: f64 = p
        .iter()
        .zip(&w.columns)
        .zip(&c)
        .map(|((pm, v), cm)| v * pm * cm)
        .sum::<f64>()
        + w.noise * sigma2 * c0;
    if rho == 0.0 {
        return Ok(SweepStep {
            p: vec![0.0; p.len()],
            sigma2: 0.0,
            objective,
        });
    }
    let p_next = p
        .iter()
        .zip(&w.columns)
        .zip(&c)
        .map(|((pm, v), cm)| if *v > 0.0 { pm * cm / (v * rho) } else { 0.0 })
        .collect();
    Ok(SweepStep {
        p: p_next,
        sigma2: sigma2 * c0 / (w.noise * rho),
        objective,
    })
}

/// One multiplicative covariance-matching update of `(p, σ²)`.
///
/// With `c_m = |a_mᵀR⁻¹y|`, `c₀ = ‖R⁻¹y‖` and `ρ = Σ v_m p_m c_m + v₀ σ² c₀`,
/// the update is `p_m ← p_m c_m / (v_m ρ)` and `σ² ← σ² c₀ / (v₀ ρ)`.
pub fn spice_sweep(p: &[f64], sigma2: f64, problem: &SqrtLassoProblem, noise_weight: f64) -> Result<(Vec<f64>, f64)> {
    if p.iter().all(|&v| v == 0.0) && sigma2 == 0.0 {
        return Err(Error::InvalidArgument("powers are all zero".into()));
    }
    let w = SweepWeights::new(problem, noise_weight);
    let step = sweep_with_objective(p, sigma2, problem, &w)?;
    Ok((step.p, step.sigma2))
}
