//! Random sparse networks with stable dynamics, their simulation, and the
//! predictor parameters they imply.

mod network;
mod transfer;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use network::{
    closed_loop_matrix, network_stable, network_stable_with_margin, simulate, spectral_radius,
    true_predictor_taps, Edge, GroundTruthNetwork, DEFAULT_BURN_IN, OVERFLOW_GUARD, STABILITY_MARGIN,
};
pub use transfer::{
    random_fir, random_noise_filter, random_noise_fir, random_rational, TransferFunction, MAX_POLE_MODULUS,
};

/// Filter draws per topology before the topology itself is redrawn.
pub const FILTER_ATTEMPTS: usize = 100;
/// Topology draws before generation gives up.
pub const TOPOLOGY_ATTEMPTS: usize = 100;

/// `round(rho · J(J−1))` directed off-diagonal edges chosen uniformly.
pub fn random_topology(nodes: usize, rho: f64, seed: u64) -> Result<Vec<Vec<bool>>> {
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho must be in (0, 1], got {rho}")));
    }
    let slots: Vec<(usize, usize)> = (0..nodes)
        .flat_map(|i| (0..nodes).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let count = (rho * slots.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency = vec![vec![false; nodes]; nodes];
    for idx in rand::seq::index::sample(&mut rng, slots.len(), count) {
        let (i, j) = slots[idx];
        adjacency[i][j] = true;
    }
    Ok(adjacency)
}

/// Edge and noise dynamics of a generated network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// FIR edges with taps uniform on `[0, 1]`, `H_i = 1`.
    Fir,
    /// FIR edges as above, `H_i` a random monic minimum-phase FIR of length 3.
    FirNoise,
    /// Random stable rational `G_ij` and `H_i`.
    Rational,
}

impl EdgeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeMode::Fir => "fir",
            EdgeMode::FirNoise => "fir_noise",
            EdgeMode::Rational => "rational",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub rho: f64,
    /// FIR edge length.
    pub taps: usize,
    pub mode: EdgeMode,
    pub order_range: (usize, usize),
}

fn draw_filters<R: RngCore>(
    spec: &NetworkSpec,
    adjacency: &[Vec<bool>],
    rng: &mut R,
) -> (Vec<Edge>, Vec<TransferFunction>, Vec<f64>) {
    let (lo, hi) = spec.order_range;
    let mut edges = Vec::new();
    for (to, row) in adjacency.iter().enumerate() {
        for (from, &present) in row.iter().enumerate() {
            if !present {
                continue;
            }
            let seed = rng.next_u64();
            let filter = match spec.mode {
                EdgeMode::Fir | EdgeMode::FirNoise => random_fir(spec.taps, seed),
                EdgeMode::Rational => random_rational(lo, hi, seed),
            };
            edges.push(Edge { from, to, filter });
        }
    }
    let noise = (0..spec.nodes)
        .map(|_| {
            let seed = rng.next_u64();
            match spec.mode {
                EdgeMode::Fir => TransferFunction::identity(),
                EdgeMode::FirNoise => random_noise_fir(3, seed),
                EdgeMode::Rational => random_noise_filter(lo, hi, seed),
            }
        })
        .collect();
    let sigma2 = (0..spec.nodes).map(|_| rng.random_range(0.0..=1.0)).collect();
    (edges, noise, sigma2)
}

/// Draws a network whose closed loop is stable, by rejection sampling.
pub fn generate_network(spec: &NetworkSpec, seed: u64) -> Result<GroundTruthNetwork> {
    let (lo, hi) = spec.order_range;
    if spec.taps == 0 {
        return Err(Error::InvalidArgument("FIR length must be positive".into()));
    }
    if spec.mode == EdgeMode::Rational && !(1 <= lo && lo <= hi) {
        return Err(Error::InvalidArgument(format!("invalid order range {lo}..={hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..TOPOLOGY_ATTEMPTS {
        let adjacency = random_topology(spec.nodes, spec.rho, rng.next_u64())?;
        for _ in 0..FILTER_ATTEMPTS {
            let (edges, noise, sigma2) = draw_filters(spec, &adjacency, &mut rng);
            let net = GroundTruthNetwork::new(spec.nodes, edges, noise, sigma2, Some(seed))?;
            if network_stable(&net) {
                return Ok(net);
            }
        }
    }
    Err(Error::PersistentInstability(TOPOLOGY_ATTEMPTS))
}
