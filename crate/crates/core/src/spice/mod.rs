//! Hyperparameter-free sparse estimation of one node's predictor.
//!
//! The taps are modelled as zero-mean with diagonal covariance `diag(p)` and
//! the innovation as white with power `σ²`, so the target has covariance
//! `R = A diag(p) Aᵀ + σ² I`. SPICE fits `(p, σ²)` by covariance matching with
//! a multiplicative fixed-point iteration ([`spice_sweep`]); the estimate is the
//! posterior mean `θ = diag(p) Aᵀ R⁻¹ y`.
//!
//! The fixed point is the minimizer of the weighted square-root LASSO
//!
//! ```text
//! F(θ) = ‖y − Aθ‖₂ + Σ_m λ_m |θ_m|,   λ_m = ‖a_m‖₂ / √N,
//! ```
//!
//! which gives a checkable optimality certificate ([`kkt_residual`]). The
//! SPICE phase identifies the support and the result is then refined on the
//! convex program until the KKT residual is below tolerance.

mod homotopy;
mod kkt;
mod l0;
mod polish;
mod sweep;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{NodeEstimate, RegressionProblem, SolveStatus};

pub use kkt::{kkt_residual, sqrt_lasso_objective};
pub use l0::{solve_l0, solve_l0_oracle, MAX_ENUMERATION_COLUMNS};
pub use sweep::{posterior_mean, spice_objective, spice_sweep};

/// Column weight normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    /// `λ_m = ‖a_m‖ / √N`.
    #[default]
    InvSqrtN,
    /// `λ_m = ‖a_m‖`. Since `|a_mᵀr| ≤ ‖a_m‖‖r‖` this always yields `θ = 0`.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Budget for SPICE sweeps, and separately for refinement passes.
    pub max_iterations: usize,
    /// Relative change of `(p, σ²)` per sweep below which SPICE stops.
    pub rel_tol: f64,
    pub kkt_tol: f64,
    /// Lower clamp on powers, relative to the largest power.
    pub power_floor: f64,
    pub lambda_scale: LambdaScale,
    /// Weight `v₀` of the noise power in the covariance-matching constraint.
    pub noise_weight: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            rel_tol: 1e-8,
            kkt_tol: 1e-6,
            power_floor: 1e-12,
            lambda_scale: LambdaScale::InvSqrtN,
            noise_weight: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("kkt_tol", self.kkt_tol),
            ("noise_weight", self.noise_weight),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.power_floor >= 0.0) {
            return Err(Error::InvalidArgument("power_floor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `min ‖y − Aθ‖₂ + Σ λ_m |θ_m|` with column-norm weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtLassoProblem {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl SqrtLassoProblem {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, scale: LambdaScale) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows, y has {}",
                a.nrows(),
                y.len()
            )));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidArgument("empty regression problem".into()));
        }
        if y.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite data".into()));
        }
        let factor = match scale {
            LambdaScale::InvSqrtN => 1.0 / (a.nrows() as f64).sqrt(),
            LambdaScale::Unit => 1.0,
        };
        let lambda = DVector::from_iterator(a.ncols(), a.column_iter().map(|c| c.norm() * factor));
        Ok(Self { a, y, lambda })
    }

    pub fn from_regression(problem: &RegressionProblem, scale: LambdaScale) -> Result<Self> {
        Self::new(problem.a.clone(), problem.y.clone(), scale)
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

/// Solves one node's problem. See [`solve`].
pub fn solve_node(problem: &RegressionProblem, config: &SolverConfig) -> Result<NodeEstimate> {
    let lasso = SqrtLassoProblem::from_regression(problem, config.lambda_scale)?;
    let mut est = solve(&lasso, config)?;
    est.node = problem.node;
    Ok(est)
}

/// SPICE followed by refinement on the square-root LASSO.
///
/// A non-converged solve still returns the best iterate, with
/// [`SolveStatus::MaxIterations`] or [`SolveStatus::Interpolation`] and its
/// KKT residual.
pub fn solve(problem: &SqrtLassoProblem, config: &SolverConfig) -> Result<NodeEstimate> {
    config.validate()?;
    let m = problem.cols();
    if problem.lambda.iter().all(|&l| l == 0.0) {
        return Err(Error::ZeroRegressors);
    }
    if problem.y.iter().all(|&v| v == 0.0) {
        return Ok(NodeEstimate {
            node: 0,
            theta: vec![0.0; m],
            p: vec![0.0; m],
            sigma2: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
            objective: 0.0,
            residual_norm: 0.0,
            objective_trace: Vec::new(),
        });
    }

    let weights = sweep::SweepWeights::new(problem, config.noise_weight);
    let (mut p, mut sigma2) = sweep::initial_powers(problem);
    let mut trace = Vec::new();
    let mut sweeps = 0;
    while sweeps < config.max_iterations {
        let step = sweep::sweep_with_objective(&p, sigma2, problem, &weights)?;
        sweeps += 1;
        trace.push(step.objective);
        let (mut p_next, s_next) = (step.p, step.sigma2);
        let floor = config.power_floor * p_next.iter().cloned().fold(0.0, f64::max);
        for (pm, &l) in p_next.iter_mut().zip(problem.lambda.iter()) {
            if l > 0.0 && *pm < floor {
                *pm = floor;
            }
        }
        let scale: f64 = p.iter().sum::<f64>() + sigma2;
        let change: f64 = p.iter().zip(&p_next).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + (sigma2 - s_next).abs();
        p = p_next;
        sigma2 = s_next;
        if change <= config.rel_tol * scale {
            break;
        }
        // The noise power collapses when the optimum interpolates the data.
        let signal: f64 = p.iter().zip(weights.columns.iter()).map(|(pm, v)| pm * v * v).sum();
        if sigma2 <= 1e-14 * signal {
            break;
        }
    }

    let spice_theta = sweep::posterior_mean(&p, sigma2, problem)
        .map(|t| t.iter().cloned().collect::<Vec<_>>())
        .unwrap_or_else(|_| vec![0.0; m]);
    let refined = polish::refine(problem, &spice_theta, config.kkt_tol, config.max_iterations);

    let theta = refined.theta;
    let residual = &problem.y - &problem.a * DVector::from_column_slice(&theta);
    let residual_norm = residual.norm();
    let objective = sqrt_lasso_objective(problem, &theta)?;
    let (kkt, status) = match kkt_residual(problem, &theta) {
        Ok(r) if r <= config.kkt_tol => (r, SolveStatus::Converged),
        Ok(r) => (r, SolveStatus::MaxIterations),
        Err(Error::Interpolation { certificate_residual }) => {
            (certificate_residual, SolveStatus::Interpolation)
        }
        Err(e) => return Err(e),
    };

    // Fixed point of the sweep in its normalization Σ v² p + v₀² σ² = 1.
    let v0 = config.noise_weight;
    let (p, sigma2) = if objective > 0.0 {
        let p = theta
            .iter()
            .zip(problem.lambda.iter())
            .map(|(t, l)| if *l > 0.0 { t.abs() / (l * v0 * v0 * objective) } else { 0.0 })
            .collect();
        (p, residual_norm / (v0 * v0 * objective))
    } else {
        (vec![0.0; m], 0.0)
    };

    Ok(NodeEstimate {
        node: 0,
        theta,
        p,
        sigma2,
        kkt_residual: kkt,
        iterations: sweeps + refined.passes,
        status,
        objective,
        residual_norm,
        objective_trace: trace,
    })
}
