//! End-to-end network estimation and the Monte-Carlo experiment runner.

mod config;
mod experiment;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{topology_score, TopologyScore};
use crate::netmodel::{
    assemble_from_estimates, assemble_network, build_full_window_problem, NetworkEstimate, NodeEstimate,
    RegressionProblem, SolveStatus, TimeSeries,
};
use crate::spice::{solve_node, SolverConfig};

pub use config::{resolve_workers, ExperimentConfig};
pub use experiment::{
    derive_seed, run_experiment, run_instance, run_single, AggregateRow, RatioResult, ResultRow, ResultTable,
    RunDetail, LONG_HEADER,
};

/// Solves every node independently, in parallel. A node whose regressors are
/// all zero gets the zero estimate.
pub fn estimate_nodes(problems: &[RegressionProblem], solver: &SolverConfig) -> Result<Vec<NodeEstimate>> {
    problems
        .par_iter()
        .map(|problem| match solve_node(problem, solver) {
            Err(Error::ZeroRegressors) => Ok(zero_estimate(problem)),
            other => other,
        })
        .collect()
}

fn zero_estimate(problem: &RegressionProblem) -> NodeEstimate {
    let m = problem.cols();
    NodeEstimate {
        node: problem.node,
        theta: vec![0.0; m],
        p: vec![0.0; m],
        sigma2: 0.0,
        kkt_residual: 0.0,
        iterations: 0,
        status: SolveStatus::Converged,
        objective: problem.y.norm(),
        residual_norm: problem.y.norm(),
        objective_trace: Vec::new(),
    }
}

/// Per-node regression over the maximal window, SPICE, then thresholding.
/// Non-converged nodes are kept and flagged by their status.
pub fn estimate_network(
    w: &TimeSeries,
    lags: usize,
    delta: f64,
    solver: &SolverConfig,
) -> Result<(NetworkEstimate, Vec<NodeEstimate>)> {
    if w.len() <= lags + 1 {
        return Err(Error::InvalidArgument(format!(
            "series of length {} too short for {lags} lags",
            w.len()
        )));
    }
    let problems = (0..w.nodes())
        .map(|i| build_full_window_problem(w, i, lags))
        .collect::<Result<Vec<_>>>()?;
    let estimates = estimate_nodes(&problems, solver)?;
    let network = assemble_from_estimates(&estimates, delta, lags)?;
    Ok((network, estimates))
}

/// Topology scores when the stored taps are re-thresholded at each `delta`.
pub fn sweep_threshold(
    estimates: &[NodeEstimate],
    truth: &[Vec<bool>],
    deltas: &[f64],
    lags: usize,
) -> Result<Vec<(f64, TopologyScore)>> {
    if deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("deltas must be positive and sorted".into()));
    }
    let thetas: Vec<Vec<f64>> = estimates.iter().map(|e| e.theta.clone()).collect();
    deltas
        .iter()
        .map(|&d| {
            let net = assemble_network(&thetas, d, lags)?;
            Ok((d, topology_score(&net.adjacency, truth)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{simulate, Edge, GroundTruthNetwork, TransferFunction};

    fn chain_series(samples: usize) -> (GroundTruthNetwork, TimeSeries) {
        let net = GroundTruthNetwork::new(
            3,
            vec![Edge { from: 0, to: 1, filter: TransferFunction::fir(&[0.9, 0.5]) }],
            vec![TransferFunction::identity(); 3],
            vec![1.0, 0.2, 0.5],
            None,
        )
        .unwrap();
        let w = simulate(&net, samples, 200, 17).unwrap();
        (net, w)
    }

    #[test]
    fn zero_series_gives_empty_network() {
        let w = TimeSeries::new(vec![vec![0.0; 40]; 3]).unwrap();
        let (net, est) = estimate_network(&w, 3, 0.1, &SolverConfig::default()).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert!(est.iter().all(|e| e.theta.iter().all(|&t| t == 0.0)));
    }

    #[test]
    fn recovers_chain_edge() {
        let (net, w) = chain_series(600);
        let (est, nodes) = estimate_network(&w, 2, 0.1, &SolverConfig::default()).unwrap();
        assert_eq!(est.adjacency, net.adjacency);
        assert!(nodes.iter().all(|n| n.converged()));
    }

    #[test]
    fn extra_lags_do_not_change_topology() {
        let (_, w) = chain_series(600);
        let (a, _) = estimate_network(&w, 2, 0.1, &SolverConfig::default()).unwrap();
        let (b, _) = estimate_network(&w, 4, 0.1, &SolverConfig::default()).unwrap();
        assert_eq!(a.adjacency, b.adjacency);
    }

    #[test]
    fn too_short_series_rejected() {
        let w = TimeSeries::new(vec![vec![1.0, 2.0, 3.0]; 2]).unwrap();
        assert!(estimate_network(&w, 2, 0.1, &SolverConfig::default()).is_err());
    }

    #[test]
    fn threshold_sweep_limits() {
        let (net, w) = chain_series(400);
        let (at_default, nodes) = estimate_network(&w, 2, 0.1, &SolverConfig::default()).unwrap();
        let max_tap = nodes.iter().flat_map(|n| n.theta.iter()).fold(0.0f64, |a, t| a.max(t.abs()));
        let rows = sweep_threshold(&nodes, &net.adjacency, &[1e-300, 0.1, max_tap * 2.0], 2).unwrap();
        assert_eq!(rows[0].1.tpr, 1.0);
        let expected = topology_score(&at_default.adjacency, &net.adjacency).unwrap();
        assert_eq!(rows[1].1, expected);
        assert_eq!((rows[2].1.tpr, rows[2].1.fpr), (0.0, 0.0));
        assert!(sweep_threshold(&nodes, &net.adjacency, &[0.2, 0.1], 2).is_err());
    }
}
