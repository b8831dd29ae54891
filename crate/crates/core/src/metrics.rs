//! Scoring of estimated networks against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology recovery rates over off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyScore {
    pub tpr: f64,
    pub fpr: f64,
    /// Distance to the ideal point: `√(fpr² + (1 − tpr)²)`.
    pub dis: f64,
    pub true_edges: usize,
    pub found_true: usize,
    pub false_edges: usize,
    pub possible_non_edges: usize,
    /// TPR set to 1 because the true graph has no edges.
    pub tpr_by_convention: bool,
    /// FPR set to 0 because the true graph is complete.
    pub fpr_by_convention: bool,
}

fn check_square(m: &[Vec<bool>], j: usize, name: &str) -> Result<()> {
    if m.len() != j || m.iter().any(|row| row.len() != j) {
        return Err(Error::DimensionMismatch(format!("{name} is not {j}×{j}")));
    }
    Ok(())
}

pub fn topology_score(est: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<TopologyScore> {
    let j = truth.len();
    check_square(truth, j, "truth")?;
    check_square(est, j, "estimate")?;
    let (mut true_edges, mut found_true, mut false_edges, mut non_edges) = (0, 0, 0, 0);
    for i in 0..j {
        for k in 0..j {
            if i == k {
                continue;
            }
            match (truth[i][k], est[i][k]) {
                (true, found) => {
                    true_edges += 1;
                    found_true += found as usize;
                }
                (false, found) => {
                    non_edges += 1;
                    false_edges += found as usize;
                }
            }
        }
    }
    let tpr = if true_edges == 0 { 1.0 } else { found_true as f64 / true_edges as f64 };
    let fpr = if non_edges == 0 { 0.0 } else { false_edges as f64 / non_edges as f64 };
    Ok(TopologyScore {
        tpr,
        fpr,
        dis: distance(tpr, fpr),
        true_edges,
        found_true,
        false_edges,
        possible_non_edges: non_edges,
        tpr_by_convention: true_edges == 0,
        fpr_by_convention: non_edges == 0,
    })
}

pub fn distance(tpr: f64, fpr: f64) -> f64 {
    (fpr * fpr + (1.0 - tpr) * (1.0 - tpr)).sqrt()
}

/// Parameter error averaged over nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseScore {
    pub nmse: f64,
    pub nodes_scored: usize,
    /// Nodes whose true parameter vector is zero.
    pub nodes_excluded: usize,
}

/// Mean over nodes of `‖θ̂_i − θ_i‖² / ‖θ_i‖²`, skipping nodes with `θ_i = 0`.
pub fn nmse(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<NmseScore> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated nodes, {} true nodes",
            estimate.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    let mut scored = 0;
    for (est, tru) in estimate.iter().zip(truth) {
        if est.len() != tru.len() {
            return Err(Error::DimensionMismatch("parameter vector lengths differ".into()));
        }
        let energy: f64 = tru.iter().map(|v| v * v).sum();
        if energy == 0.0 {
            continue;
        }
        let err: f64 = est.iter().zip(tru).map(|(a, b)| (a - b) * (a - b)).sum();
        total += err / energy;
        scored += 1;
    }
    if scored == 0 {
        return Err(Error::Undefined("NMSE with all-zero ground truth".into()));
    }
    Ok(NmseScore {
        nmse: total / scored as f64,
        nodes_scored: scored,
        nodes_excluded: truth.len() - scored,
    })
}
