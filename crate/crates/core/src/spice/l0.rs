use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netmodel::RegressionProblem;

pub const MAX_ENUMERATION_COLUMNS: usize = 20;

/// Best `‖y − Aθ‖²` over all supports of size at most `max_support`, by
/// exhaustive enumeration with a least-squares refit on each support.
///
/// Among supports with equal residual the smaller one wins.
pub fn solve_l0_oracle(problem: &RegressionProblem, max_support: usize) -> Result<Vec<f64>> {
    solve_l0(&problem.a, &problem.y, max_support)
}

pub fn solve_l0(a: &DMatrix<f64>, y: &DVector<f64>, max_support: usize) -> Result<Vec<f64>> {
    let m = a.ncols();
    if m > MAX_ENUMERATION_COLUMNS {
        return Err(Error::EnumerationTooLarge(m));
    }
    if max_support > m {
        return Err(Error::InvalidArgument(format!(
            "max_support {max_support} exceeds column count {m}"
        )));
    }
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch("A and y row counts differ".into()));
    }
    let mut masks: Vec<u32> = (0u32..(1u32 << m))
        .filter(|mask| mask.count_ones() as usize <= max_support)
        .collect();
    masks.sort_by_key(|mask| (mask.count_ones(), *mask));

    let mut best = vec![0.0; m];
    let mut best_rss = y.norm_squared();
    for mask in masks.into_iter().skip(1) {
        let cols: Vec<usize> = (0..m).filter(|&c| mask & (1 << c) != 0).collect();
        let a_s = a.select_columns(cols.iter());
        let Ok(coef) = a_s.clone().svd(true, true).solve(y, 1e-12) else {
            continue;
        };
        let rss = (y - &a_s * &coef).norm_squared();
        if rss < best_rss * (1.0 - 1e-12) {
            best_rss = rss;
            best = vec![0.0; m];
            for (&c, v) in cols.iter().zip(coef.iter()) {
                best[c] = *v;
            }
        }
    }
    Ok(best)
}
