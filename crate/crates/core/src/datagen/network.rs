use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::transfer::{eigenvalues, poly_mul, series_ratio, TransferFunction};
use crate::error::{Error, Result};
use crate::netmodel::TimeSeries;

/// Default stability margin on the closed-loop spectral radius.
pub const STABILITY_MARGIN: f64 = 1e-6;
/// Simulated magnitudes beyond this signal an undetected instability.
pub const OVERFLOW_GUARD: f64 = 1e9;
pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Source node, zero based.
    pub from: usize,
    pub to: usize,
    pub filter: TransferFunction,
}

/// Network `w = G(q) w + H(q) e` with diagonal noise filters.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthNetwork {
    pub nodes: usize,
    /// `adjacency[i][j]`: edge from `j` to `i`.
    pub adjacency: Vec<Vec<bool>>,
    pub edges: Vec<Edge>,
    pub noise_filters: Vec<TransferFunction>,
    pub sigma2: Vec<f64>,
    /// Seed the network was drawn from, when generated.
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct FilterRecord {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    from: usize,
    to: usize,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    #[serde(rename = "J")]
    nodes: usize,
    edges: Vec<EdgeRecord>,
    noise_filters: Vec<FilterRecord>,
    sigma2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl GroundTruthNetwork {
    /// Builds and validates a network from its parts.
    pub fn new(
        nodes: usize,
        edges: Vec<Edge>,
        noise_filters: Vec<TransferFunction>,
        sigma2: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidArgument("need at least 2 nodes".into()));
        }
        if noise_filters.len() != nodes || sigma2.len() != nodes {
            return Err(Error::DimensionMismatch("one noise filter and variance per node".into()));
        }
        if sigma2.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("noise variances must be nonnegative".into()));
        }
        let mut adjacency = vec![vec![false; nodes]; nodes];
        for e in &edges {
            if e.from >= nodes || e.to >= nodes || e.from == e.to {
                return Err(Error::IndexOutOfRange(format!("edge {} -> {}", e.from, e.to)));
            }
            if adjacency[e.to][e.from] {
                return Err(Error::InvalidArgument(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            if !e.filter.is_strictly_proper() || !e.filter.is_monic() {
                return Err(Error::InvalidArgument(format!(
                    "edge {} -> {} must be strictly proper with monic denominator",
                    e.from, e.to
                )));
            }
            adjacency[e.to][e.from] = true;
        }
        for h in &noise_filters {
            if !h.is_monic() || h.numerator.first() != Some(&1.0) {
                return Err(Error::InvalidArgument("noise filters must be monic".into()));
            }
        }
        Ok(Self {
            nodes,
            adjacency,
            edges,
            noise_filters,
            sigma2,
            seed,
        })
    }

    pub fn edge(&self, to: usize, from: usize) -> Option<&TransferFunction> {
        self.edges.iter().find(|e| e.to == to && e.from == from).map(|e| &e.filter)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = NetworkRecord {
            nodes: self.nodes,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from + 1,
                    to: e.to + 1,
                    numerator: e.filter.numerator.clone(),
                    denominator: e.filter.denominator.clone(),
                })
                .collect(),
            noise_filters: self
                .noise_filters
                .iter()
                .map(|h| FilterRecord {
                    numerator: h.numerator.clone(),
                    denominator: h.denominator.clone(),
                })
                .collect(),
            sigma2: self.sigma2.clone(),
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: NetworkRecord = serde_json::from_str(text)?;
        let mut edges = Vec::with_capacity(rec.edges.len());
        for e in rec.edges {
            if e.from == 0 || e.to == 0 {
                return Err(Error::IndexOutOfRange("node labels start at 1".into()));
            }
            edges.push(Edge {
                from: e.from - 1,
                to: e.to - 1,
                filter: TransferFunction::new(e.numerator, e.denominator),
            });
        }
        let noise = rec
            .noise_filters
            .into_iter()
            .map(|h| TransferFunction::new(h.numerator, h.denominator))
            .collect();
        Self::new(rec.nodes, edges, noise, rec.sigma2, rec.seed)
    }
}

/// Closed-loop state matrix of `w = G(q) w + v`.
///
/// Each edge gets a controllable canonical realization `(A_e, b_e, c_eᵀ)`
/// driven by its source signal; since every edge is strictly proper,
/// `w = C x + v` and the loop closes as `x⁺ = (A + B C) x + B v`.
pub fn closed_loop_matrix(net: &GroundTruthNetwork) -> DMatrix<f64> {
    let offsets: Vec<usize> = net
        .edges
        .iter()
        .scan(0, |acc, e| {
            let start = *acc;
            *acc += e.filter.order();
            Some(start)
        })
        .collect();
    let dim: usize = net.edges.iter().map(|e| e.filter.order()).sum();
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, net.nodes);
    let mut c = DMatrix::zeros(net.nodes, dim);
    for (e, &off) in net.edges.iter().zip(&offsets) {
        let n = e.filter.order();
        if n == 0 {
            continue;
        }
        let den = |k: usize| e.filter.denominator.get(k).copied().unwrap_or(0.0);
        let num = |k: usize| e.filter.numerator.get(k).copied().unwrap_or(0.0);
        for k in 0..n {
            a[(off, off + k)] = -den(k + 1);
            c[(e.to, off + k)] = num(k + 1);
        }
        for k in 1..n {
            a[(off + k, off + k - 1)] = 1.0;
        }
        b[(off, e.from)] = 1.0;
    }
    a + b * c
}

pub fn spectral_radius(net: &GroundTruthNetwork) -> f64 {
    eigenvalues(&closed_loop_matrix(net))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// For FIR edges with nonnegative taps the loop is a positive system, which is
/// unstable whenever the DC gain matrix `G(1)` has spectral radius at least 1.
fn positive_loop_gain_too_large(net: &GroundTruthNetwork) -> bool {
    let positive_fir = net.edges.iter().all(|e| {
        e.filter.denominator.iter().skip(1).all(|&a| a == 0.0) && e.filter.numerator.iter().all(|&b| b >= 0.0)
    });
    if !positive_fir || net.edges.is_empty() {
        return false;
    }
    let mut gain = DMatrix::zeros(net.nodes, net.nodes);
    for e in &net.edges {
        gain[(e.to, e.from)] += e.filter.numerator.iter().sum::<f64>() / e.filter.denominator[0];
    }
    eigenvalues(&gain).iter().any(|z| z.norm() >= 1.0)
}

/// True when `(I − G(q))⁻¹` is stable with the given margin.
pub fn network_stable_with_margin(net: &GroundTruthNetwork, margin: f64) -> bool {
    if positive_loop_gain_too_large(net) {
        return false;
    }
    spectral_radius(net) < 1.0 - margin
}

pub fn network_stable(net: &GroundTruthNetwork) -> bool {
    network_stable_with_margin(net, STABILITY_MARGIN)
}

/// Simulates `samples` values after discarding `burn_in` from zero initial
/// conditions, with Gaussian innovations `e_i ~ N(0, σ_i²)`.
pub fn simulate(net: &GroundTruthNetwork, samples: usize, burn_in: usize, seed: u64) -> Result<TimeSeries> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !network_stable(net) {
        return Err(Error::Unstable);
    }
    let total = samples + burn_in;
    let j = net.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std: Vec<f64> = net.sigma2.iter().map(|s| s.sqrt()).collect();
    let mut e = vec![vec![0.0; total]; j];
    for t in 0..total {
        for (row, s) in e.iter_mut().zip(&std) {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[t] = s * z;
        }
    }
    let v: Vec<Vec<f64>> = net
        .noise_filters
        .iter()
        .zip(&e)
        .map(|(h, ei)| h.filter(ei))
        .collect();

    let mut w = vec![vec![0.0; total]; j];
    let mut edge_out = vec![vec![0.0; total]; net.edges.len()];
    for t in 0..total {
        for (k, edge) in net.edges.iter().enumerate() {
            let (num, den) = (&edge.filter.numerator, &edge.filter.denominator);
            let src = &w[edge.from];
            let mut acc = 0.0;
            for (d, b) in num.iter().enumerate().skip(1).take(t) {
                acc += b * src[t - d];
            }
            for (d, a) in den.iter().enumerate().skip(1).take(t) {
                acc -= a * edge_out[k][t - d];
            }
            edge_out[k][t] = acc;
        }
        for i in 0..j {
            w[i][t] = v[i][t];
        }
        for (k, edge) in net.edges.iter().enumerate() {
            w[edge.to][t] += edge_out[k][t];
        }
        for row in &w {
            let x = row[t];
            if !x.is_finite() || x.abs() > OVERFLOW_GUARD {
                return Err(Error::Diverged(t));
            }
        }
    }
    TimeSeries::new(w.into_iter().map(|row| row[burn_in..].to_vec()).collect())
}

/// Ground-truth predictor parameters, one vector of J blocks of K taps per
/// node: `θ_ij` from `G_ij / H_i` and `θ_ii` from `1 − H_i⁻¹`, delays `1..=K`.
pub fn true_predictor_taps(net: &GroundTruthNetwork, lags: usize) -> Result<Vec<Vec<f64>>> {
    let j = net.nodes;
    let mut out = vec![vec![0.0; j * lags]; j];
    for (i, h) in net.noise_filters.iter().enumerate() {
        if h.numerator.first() != Some(&1.0) || h.zeros().iter().any(|z| !(z.norm() < 1.0)) {
            return Err(Error::NonInvertibleNoiseFilter);
        }
        // 1 − D/C = (C − D)/C.
        let len = h.numerator.len().max(h.denominator.len());
        let diff: Vec<f64> = (0..len)
            .map(|k| {
                h.numerator.get(k).copied().unwrap_or(0.0) - h.denominator.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        let series = series_ratio(&diff, &h.numerator, lags + 1);
        out[i][i * lags..(i + 1) * lags].copy_from_slice(&series[1..]);
    }
    for e in &net.edges {
        let h = &net.noise_filters[e.to];
        // G/H = (B D) / (A C).
        let num = poly_mul(&e.filter.numerator, &h.denominator);
        let den = poly_mul(&e.filter.denominator, &h.numerator);
        let series = series_ratio(&num, &den, lags + 1);
        out[e.to][e.from * lags..(e.from + 1) * lags].copy_from_slice(&series[1..]);
    }
    Ok(out)
}
