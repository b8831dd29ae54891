//! Node signals, per-node regression problems and network estimates.
//!
//! Indices are zero based throughout the API: node `i` is `0..J` and time `t`
//! is `0..T`. The CSV and JSON formats label nodes from 1 (`node_1`, ...).

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A J×T panel of node signals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Vec<Vec<f64>>,
}

impl TimeSeries {
    /// Builds a panel from one sample vector per node.
    pub fn new(data: Vec<Vec<f64>>) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 nodes, got {}",
                data.len()
            )));
        }
        let t = data[0].len();
        if t == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        if data.iter().any(|row| row.len() != t) {
            return Err(Error::DimensionMismatch(
                "node signals have different lengths".into(),
            ));
        }
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self { data })
    }

    pub fn nodes(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.data[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.data
    }

    /// The first `len` samples of every node.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::IndexOutOfRange(format!(
                "prefix length {len} outside 1..={}",
                self.len()
            )));
        }
        Ok(Self {
            data: self.data.iter().map(|row| row[..len].to_vec()).collect(),
        })
    }

    /// Reads the CSV layout: header `node_1,...,node_J`, one row per sample.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let j = headers.len();
        for (idx, name) in headers.iter().enumerate() {
            if name.trim() != format!("node_{}", idx + 1) {
                return Err(Error::InvalidArgument(format!(
                    "unexpected column header {name:?}, expected node_{}",
                    idx + 1
                )));
            }
        }
        let mut data = vec![Vec::new(); j];
        for record in rdr.records() {
            let record = record?;
            if record.len() != j {
                return Err(Error::DimensionMismatch(format!(
                    "row has {} fields, expected {j}",
                    record.len()
                )));
            }
            for (row, field) in data.iter_mut().zip(record.iter()) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("cannot parse sample {field:?}"))
                })?;
                row.push(v);
            }
        }
        Self::new(data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record((1..=self.nodes()).map(|j| format!("node_{j}")))?;
        for t in 0..self.len() {
            wtr.write_record(self.data.iter().map(|row| row[t].to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Target vector and lag regressors for predicting one node.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub y: DVector<f64>,
    /// N×(J·K) regressors, block `j` holds the past of node `j`.
    pub a: DMatrix<f64>,
    pub node: usize,
    pub lags: usize,
    /// Time index of the first predicted sample.
    pub t0: usize,
}

impl RegressionProblem {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

/// Lag matrix of one signal: entry `(n, k-1)` is `series[t0 + n - k]` for
/// `k = 1..=K`, so row `n` holds the K samples preceding `t0 + n`, most
/// recent first.
pub fn build_lag_matrix(series: &[f64], t0: usize, rows: usize, lags: usize) -> Result<DMatrix<f64>> {
    if lags == 0 || rows == 0 {
        return Err(Error::InvalidArgument("rows and lags must be positive".into()));
    }
    if t0 < lags {
        return Err(Error::IndexOutOfRange(format!(
            "t0 = {t0} leaves fewer than {lags} past samples"
        )));
    }
    if t0 + rows > series.len() {
        return Err(Error::IndexOutOfRange(format!(
            "window {t0}..{} exceeds series length {}",
            t0 + rows,
            series.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, lags, |n, k| series[t0 + n - k - 1]))
}

/// Builds `y = w_i(t0..t0+N)` and `A = [A_1 ... A_J]`.
pub fn build_regression_problem(
    w: &TimeSeries,
    node: usize,
    lags: usize,
    t0: usize,
    rows: usize,
) -> Result<RegressionProblem> {
    let j = w.nodes();
    if node >= j {
        return Err(Error::IndexOutOfRange(format!("node {node} of {j}")));
    }
    let mut a = DMatrix::zeros(rows, j * lags);
    for src in 0..j {
        let block = build_lag_matrix(w.node(src), t0, rows, lags)?;
        a.view_mut((0, src * lags), (rows, lags)).copy_from(&block);
    }
    let target = w.node(node);
    let y = DVector::from_iterator(rows, (0..rows).map(|n| target[t0 + n]));
    Ok(RegressionProblem {
        y,
        a,
        node,
        lags,
        t0,
    })
}

/// Regression problem over the maximal window `t0 = K`, `N = T - K`.
pub fn build_full_window_problem(w: &TimeSeries, node: usize, lags: usize) -> Result<RegressionProblem> {
    if w.len() <= lags {
        return Err(Error::IndexOutOfRange(format!(
            "series of length {} too short for {lags} lags",
            w.len()
        )));
    }
    build_regression_problem(w, node, lags, lags, w.len() - lags)
}

/// Outcome of a per-node solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; the best iterate is returned.
    MaxIterations,
    /// The optimum interpolates the data and no dual certificate was found.
    Interpolation,
}

/// Per-node SPICE output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEstimate {
    pub node: usize,
    /// J blocks of K taps.
    pub theta: Vec<f64>,
    /// SPICE powers at the fixed point.
    pub p: Vec<f64>,
    pub sigma2: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Square-root LASSO objective at `theta`.
    pub objective: f64,
    pub residual_norm: f64,
    /// SPICE covariance-matching objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl NodeEstimate {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Block of taps from source node `j`.
    pub fn block(&self, j: usize, lags: usize) -> &[f64] {
        &self.theta[j * lags..(j + 1) * lags]
    }
}

/// Zeroes every tap with `|theta| < delta`; `|theta| == delta` survives.
pub fn threshold_taps(theta: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    Ok(theta
        .iter()
        .map(|&v| if v.abs() >= delta { v } else { 0.0 })
        .collect())
}

/// Thresholded network: topology plus surviving edge dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEstimate {
    pub nodes: usize,
    pub lags: usize,
    pub delta: f64,
    /// `adjacency[i][j]` marks an edge from node `j` to node `i`.
    pub adjacency: Vec<Vec<bool>>,
    /// `edge_taps[i][j]`: thresholded taps of block θ_ij (all zero without an edge).
    pub edge_taps: Vec<Vec<Vec<f64>>>,
    /// Thresholded noise-model block θ_ii.
    pub self_taps: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    from: usize,
    to: usize,
    taps: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    #[serde(rename = "J")]
    nodes: usize,
    #[serde(rename = "K")]
    lags: usize,
    delta: f64,
    edges: Vec<EdgeRecord>,
    self_taps: Vec<Vec<f64>>,
}

impl NetworkEstimate {
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&e| e).count()
    }

    /// Re-assembled per-node parameter vectors from the thresholded taps.
    pub fn thetas(&self) -> Vec<Vec<f64>> {
        (0..self.nodes)
            .map(|i| {
                (0..self.nodes)
                    .flat_map(|j| {
                        if i == j {
                            self.self_taps[i].clone()
                        } else {
                            self.edge_taps[i][j].clone()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut edges = Vec::new();
        for i in 0..self.nodes {
            for j in 0..self.nodes {
                if self.adjacency[i][j] {
                    edges.push(EdgeRecord {
                        from: j + 1,
                        to: i + 1,
                        taps: self.edge_taps[i][j].clone(),
                    });
                }
            }
        }
        let record = NetworkRecord {
            nodes: self.nodes,
            lags: self.lags,
            delta: self.delta,
            edges,
            self_taps: self.self_taps.clone(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: NetworkRecord = serde_json::from_str(text)?;
        let (j, k) = (rec.nodes, rec.lags);
        if rec.self_taps.len() != j || rec.self_taps.iter().any(|t| t.len() != k) {
            return Err(Error::DimensionMismatch("self_taps must be J lists of K taps".into()));
        }
        let mut adjacency = vec![vec![false; j]; j];
        let mut edge_taps = vec![vec![vec![0.0; k]; j]; j];
        for e in rec.edges {
            if e.from == 0 || e.to == 0 || e.from > j || e.to > j || e.from == e.to {
                return Err(Error::IndexOutOfRange(format!("edge {} -> {}", e.from, e.to)));
            }
            if e.taps.len() != k {
                return Err(Error::DimensionMismatch(format!("edge has {} taps, K = {k}", e.taps.len())));
            }
            adjacency[e.to - 1][e.from - 1] = true;
            edge_taps[e.to - 1][e.from - 1] = e.taps;
        }
        Ok(Self {
            nodes: j,
            lags: k,
            delta: rec.delta,
            adjacency,
            edge_taps,
            self_taps: rec.self_taps,
        })
    }
}

/// Thresholds each node's taps and reads off the topology. Edges are decided
/// per tap: a block is an edge when any of its taps survives.
pub fn assemble_network(thetas: &[Vec<f64>], delta: f64, lags: usize) -> Result<NetworkEstimate> {
    let j = thetas.len();
    if lags == 0 {
        return Err(Error::InvalidArgument("lags must be positive".into()));
    }
    if let Some(bad) = thetas.iter().find(|t| t.len() != j * lags) {
        return Err(Error::DimensionMismatch(format!(
            "estimate of length {} for J·K = {}",
            bad.len(),
            j * lags
        )));
    }
    let mut adjacency = vec![vec![false; j]; j];
    let mut edge_taps = vec![vec![vec![0.0; lags]; j]; j];
    let mut self_taps = Vec::with_capacity(j);
    for (i, theta) in thetas.iter().enumerate() {
        let kept = threshold_taps(theta, delta)?;
        for src in 0..j {
            let block = &kept[src * lags..(src + 1) * lags];
            if src == i {
                self_taps.push(block.to_vec());
            } else if block.iter().any(|&v| v != 0.0) {
                adjacency[i][src] = true;
                edge_taps[i][src] = block.to_vec();
            }
        }
    }
    Ok(NetworkEstimate {
        nodes: j,
        lags,
        delta,
        adjacency,
        edge_taps,
        self_taps,
    })
}

/// [`assemble_network`] applied to solver outputs.
pub fn assemble_from_estimates(estimates: &[NodeEstimate], delta: f64, lags: usize) -> Result<NetworkEstimate> {
    let thetas: Vec<Vec<f64>> = estimates.iter().map(|e| e.theta.clone()).collect();
    assemble_network(&thetas, delta, lags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(rows: Vec<Vec<f64>>) -> TimeSeries {
        TimeSeries::new(rows).unwrap()
    }

    #[test]
    fn lag_matrix_examples() {
        // t0 is zero based: index 2 is the third sample.
        let m = build_lag_matrix(&[1., 2., 3., 4., 5.], 2, 2, 2).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2., 1., 3., 2.]));

        let m = build_lag_matrix(&[1., 2., 3., 4., 5., 6.], 3, 3, 3).unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(3, 3, &[3., 2., 1., 4., 3., 2., 5., 4., 3.])
        );

        let m = build_lag_matrix(&[0.0; 10], 4, 5, 3).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_matrix_rejects_out_of_range() {
        let s = [1., 2., 3., 4., 5.];
        assert!(matches!(build_lag_matrix(&s, 1, 2, 2), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(build_lag_matrix(&s, 2, 4, 2), Err(Error::IndexOutOfRange(_))));
        assert!(build_lag_matrix(&s, 2, 3, 2).is_ok());
    }

    #[test]
    fn regression_problem_example() {
        let w = series(vec![vec![1., 2., 3.], vec![4., 5., 6.]]);
        let p = build_regression_problem(&w, 0, 1, 1, 2).unwrap();
        assert_eq!(p.y.as_slice(), &[2., 3.]);
        assert_eq!(p.a, DMatrix::from_row_slice(2, 2, &[1., 4., 2., 5.]));
        assert!(matches!(
            build_regression_problem(&w, 2, 1, 1, 2),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn zero_series_gives_zero_problem() {
        let w = series(vec![vec![0.0; 12]; 3]);
        let p = build_full_window_problem(&w, 1, 3).unwrap();
        assert_eq!(p.cols(), 9);
        assert_eq!(p.rows(), 9);
        assert!(p.y.iter().all(|&v| v == 0.0));
        assert!(p.a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new(vec![vec![1.0]]).is_err());
        assert!(TimeSeries::new(vec![vec![1.0], vec![]]).is_err());
        assert!(TimeSeries::new(vec![vec![1.0], vec![f64::NAN]]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = series(vec![vec![1.5, -2.0, 3.25], vec![0.1, 0.2, 1e-17]]);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node_1,node_2\n"));
        assert_eq!(TimeSeries::read_csv(&buf[..]).unwrap(), w);
        assert!(TimeSeries::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(
            threshold_taps(&[0.05, -0.3, 0.1], 0.1).unwrap(),
            vec![0.0, -0.3, 0.1]
        );
        assert_eq!(threshold_taps(&[0.0; 4], 0.1).unwrap(), vec![0.0; 4]);
        let t = [0.5, -0.2, 0.0, 0.3];
        assert_eq!(threshold_taps(&t, 0.15).unwrap(), t.to_vec());
        assert!(threshold_taps(&t, 0.0).is_err());
        assert!(threshold_taps(&t, -1.0).is_err());
    }

    #[test]
    fn assemble_examples() {
        let net = assemble_network(&[vec![0.0; 6], vec![0.0; 6], vec![0.0; 6]], 0.1, 2).unwrap();
        assert_eq!(net.edge_count(), 0);

        let net = assemble_network(&[vec![0.0, 0.5], vec![0.5, 0.0]], 0.1, 1).unwrap();
        assert!(net.adjacency[0][1] && net.adjacency[1][0]);
        assert_eq!(net.edge_count(), 2);

        let net = assemble_network(&[vec![0.0, 0.0, 0.09, 0.02], vec![0.0; 4]], 0.1, 2).unwrap();
        assert_eq!(net.edge_count(), 0);

        assert!(matches!(
            assemble_network(&[vec![0.0; 3], vec![0.0; 4]], 0.1, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn self_block_is_not_an_edge() {
        let net = assemble_network(&[vec![0.9, 0.0], vec![0.0, -0.7]], 0.1, 1).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert_eq!(net.self_taps, vec![vec![0.9], vec![-0.7]]);
    }

    #[test]
    fn network_json_round_trip() {
        let net = assemble_network(
            &[vec![0.2, 0.0, 0.0, 0.4], vec![0.0, 0.0, 0.0, 0.0]],
            0.1,
            2,
        )
        .unwrap();
        let json = net.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["J"], 2);
        assert_eq!(v["K"], 2);
        assert_eq!(v["edges"][0]["from"], 2);
        assert_eq!(v["edges"][0]["to"], 1);
        assert_eq!(NetworkEstimate::from_json(&json).unwrap(), net);
    }

    proptest! {
        #[test]
        fn lag_matrix_shift(series in prop::collection::vec(-10.0f64..10.0, 12..40), lags in 1usize..4) {
            let t0 = lags;
            let rows = series.len() - t0;
            prop_assume!(rows >= 2);
            let full = build_lag_matrix(&series, t0, rows, lags).unwrap();
            let shifted = build_lag_matrix(&series, t0 + 1, rows - 1, lags).unwrap();
            prop_assert_eq!(shifted, full.rows(1, rows - 1).into_owned());
        }

        #[test]
        fn regressors_are_causal(len in 8usize..30, lags in 1usize..4) {
            // Each sample carries its own time index so entries reveal their source time.
            let w = TimeSeries::new(vec![(0..len).map(|t| t as f64).collect(); 3]).unwrap();
            let p = build_full_window_problem(&w, 0, lags).unwrap();
            for n in 0..p.rows() {
                for c in 0..p.cols() {
                    prop_assert!(p.a[(n, c)] < p.y[n]);
                }
            }
        }

        #[test]
        fn assemble_is_idempotent(
            thetas in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 3),
            delta in 0.01f64..0.8,
        ) {
            let once = assemble_network(&thetas, delta, 2).unwrap();
            let twice = assemble_network(&once.thetas(), delta, 2).unwrap();
            prop_assert_eq!(&once, &twice);
            for i in 0..3 {
                prop_assert!(!once.adjacency[i][i]);
            }
        }
    }
}
