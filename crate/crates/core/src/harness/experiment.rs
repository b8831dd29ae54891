use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{resolve_workers, ExperimentConfig};
use super::estimate_nodes;
use crate::datagen::{generate_network, simulate, true_predictor_taps, GroundTruthNetwork};
use crate::error::{Error, Result};
use crate::metrics::{nmse, topology_score, NmseScore, TopologyScore};
use crate::netmodel::{assemble_from_estimates, build_full_window_problem, NetworkEstimate, NodeEstimate};

pub const LONG_HEADER: [&str; 6] = ["run_id", "mode", "n_ratio", "N", "metric", "value"];

/// Seed of run `run_id`, a SplitMix64 mix of the master seed and the run index.
pub fn derive_seed(master: u64, run_id: usize) -> u64 {
    let mut z = master ^ (run_id as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One row per (run, n_ratio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub mode: String,
    pub n_ratio: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub dis: f64,
    /// Empty when every true parameter vector is zero.
    pub nmse: Option<f64>,
    pub mean_kkt_residual: f64,
    /// Nodes whose solve did not converge.
    pub failed_nodes: usize,
    /// Seconds spent estimating; excluded from reproducibility checks.
    pub wall_time: f64,
}

impl ResultRow {
    /// Bitwise equality of every field except `wall_time`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let bits = |r: &Self| {
            (
                r.run_id,
                r.mode.clone(),
                r.n_ratio.to_bits(),
                r.n,
                [r.tpr, r.fpr, r.dis, r.mean_kkt_residual].map(f64::to_bits),
                r.nmse.map(f64::to_bits),
                r.failed_nodes,
            )
        };
        bits(self) == bits(other)
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("tpr", self.tpr), ("fpr", self.fpr), ("dis", self.dis)];
        if let Some(v) = self.nmse {
            out.push(("nmse", v));
        }
        out.push(("mean_kkt_residual", self.mean_kkt_residual));
        out.push(("failed_nodes", self.failed_nodes as f64));
        out
    }
}

/// Mean and sample standard deviation over runs at one n_ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub mode: String,
    pub n_ratio: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub runs: usize,
    pub tpr_mean: f64,
    pub tpr_std: f64,
    pub fpr_mean: f64,
    pub fpr_std: f64,
    pub dis_mean: f64,
    pub dis_std: f64,
    pub nmse_mean: Option<f64>,
    pub nmse_std: Option<f64>,
    pub nmse_runs: usize,
    pub failed_nodes: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Sorted by run then n_ratio.
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(|a, b| a.run_id.cmp(&b.run_id).then(a.n_ratio.total_cmp(&b.n_ratio)));
        Self { rows }
    }

    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut ratios: Vec<f64> = self.rows.iter().map(|r| r.n_ratio).collect();
        ratios.sort_by(f64::total_cmp);
        ratios.dedup();
        ratios
            .into_iter()
            .map(|ratio| {
                let group: Vec<&ResultRow> = self.rows.iter().filter(|r| r.n_ratio == ratio).collect();
                let col = |f: fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
                let (tpr_mean, tpr_std) = mean_std(&col(|r| r.tpr));
                let (fpr_mean, fpr_std) = mean_std(&col(|r| r.fpr));
                let (dis_mean, dis_std) = mean_std(&col(|r| r.dis));
                let nmses: Vec<f64> = group.iter().filter_map(|r| r.nmse).collect();
                let (nmse_mean, nmse_std) = if nmses.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_std(&nmses);
                    (Some(m), Some(s))
                };
                AggregateRow {
                    mode: group[0].mode.clone(),
                    n_ratio: ratio,
                    n: group[0].n,
                    runs: group.len(),
                    tpr_mean,
                    tpr_std,
                    fpr_mean,
                    fpr_std,
                    dis_mean,
                    dis_std,
                    nmse_mean,
                    nmse_std,
                    nmse_runs: nmses.len(),
                    failed_nodes: group.iter().map(|r| r.failed_nodes).sum(),
                }
            })
            .collect()
    }

    pub fn rows_for_run(&self, run_id: usize) -> Vec<ResultRow> {
        self.rows.iter().filter(|r| r.run_id == run_id).cloned().collect()
    }

    pub fn write_rows<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, &self.rows)
    }

    pub fn write_aggregates<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, &self.aggregates())
    }

    /// One line per (run, N, metric); `wall_time` is left out.
    pub fn write_long<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(LONG_HEADER)?;
        for row in &self.rows {
            for (metric, value) in row.metrics() {
                out.write_record([
                    row.run_id.to_string(),
                    row.mode.clone(),
                    row.n_ratio.to_string(),
                    row.n.to_string(),
                    metric.to_string(),
                    value.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `table.csv`, `aggregate.csv` and `long.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_rows(fs::File::create(dir.join("table.csv"))?)?;
        self.write_aggregates(fs::File::create(dir.join("aggregate.csv"))?)?;
        self.write_long(fs::File::create(dir.join("long.csv"))?)?;
        Ok(())
    }

    pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Self> {
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(Self::new(rows))
    }
}

fn write_records<W: Write, T: Serialize>(writer: W, records: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Full output of one sample-size point of a run.
#[derive(Debug, Clone)]
pub struct RatioResult {
    pub n_ratio: f64,
    pub n: usize,
    pub estimate: NetworkEstimate,
    pub nodes: Vec<NodeEstimate>,
    pub topology: TopologyScore,
    pub nmse: Option<NmseScore>,
    pub wall_time: f64,
}

/// Everything produced by one Monte-Carlo run.
#[derive(Debug, Clone)]
pub struct RunDetail {
    pub run_id: usize,
    pub seed: u64,
    pub simulation_seed: u64,
    pub network: GroundTruthNetwork,
    /// Predictor parameters implied by the true network.
    pub truth: Vec<Vec<f64>>,
    pub ratios: Vec<RatioResult>,
}

impl RunDetail {
    pub fn rows(&self, config: &ExperimentConfig) -> Vec<ResultRow> {
        self.ratios
            .iter()
            .map(|r| {
                let j = r.nodes.len() as f64;
                ResultRow {
                    run_id: self.run_id,
                    mode: config.mode.as_str().to_string(),
                    n_ratio: r.n_ratio,
                    n: r.n,
                    tpr: r.topology.tpr,
                    fpr: r.topology.fpr,
                    dis: r.topology.dis,
                    nmse: r.nmse.map(|s| s.nmse),
                    mean_kkt_residual: r.nodes.iter().map(|e| e.kkt_residual).sum::<f64>() / j,
                    failed_nodes: r.nodes.iter().filter(|e| !e.converged()).count(),
                    wall_time: r.wall_time,
                }
            })
            .collect()
    }
}

/// Generates, simulates once at the largest sample size, and estimates on
/// nested prefixes of that series.
pub fn run_instance(config: &ExperimentConfig, run_id: usize) -> Result<RunDetail> {
    config.validate()?;
    let seed = derive_seed(config.master_seed, run_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network_seed = rng.next_u64();
    let simulation_seed = rng.next_u64();
    let network = generate_network(&config.network_spec(), network_seed)?;
    let k = config.lags;
    let series = simulate(&network, config.max_rows() + k, config.burn_in, simulation_seed)?;
    let truth = true_predictor_taps(&network, k)?;

    let mut ratios = Vec::with_capacity(config.n_ratios.len());
    for &ratio in &config.n_ratios {
        let n = config.rows_for(ratio);
        let start = Instant::now();
        let window = series.prefix(n + k)?;
        let problems = (0..window.nodes())
            .map(|i| build_full_window_problem(&window, i, k))
            .collect::<Result<Vec<_>>>()?;
        let nodes = estimate_nodes(&problems, &config.solver)?;
        let estimate = assemble_from_estimates(&nodes, config.delta, k)?;
        let wall_time = start.elapsed().as_secs_f64();
        let topology = topology_score(&estimate.adjacency, &network.adjacency)?;
        let thetas: Vec<Vec<f64>> = nodes.iter().map(|e| e.theta.clone()).collect();
        let nmse = match nmse(&thetas, &truth) {
            Ok(s) => Some(s),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        ratios.push(RatioResult { n_ratio: ratio, n, estimate, nodes, topology, nmse, wall_time });
    }
    Ok(RunDetail { run_id, seed, simulation_seed, network, truth, ratios })
}

/// Result rows of a single run, as `replay` reports them.
pub fn run_single(config: &ExperimentConfig, run_id: usize) -> Result<Vec<ResultRow>> {
    Ok(run_instance(config, run_id)?.rows(config))
}

/// All Monte-Carlo runs, in parallel over runs and nodes. Row order and
/// contents do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let run = || -> Result<Vec<Vec<ResultRow>>> {
        (0..config.monte_carlo)
            .into_par_iter()
            .map(|id| run_single(config, id))
            .collect()
    };
    let per_run = match resolve_workers(config.workers) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(ResultTable::new(per_run.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            nodes: 4,
            monte_carlo: 3,
            n_ratios: vec![1.0, 4.0],
            master_seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(0, i)).collect();
        let mut unique = seeds.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 100);
        assert_ne!(derive_seed(1, 0), derive_seed(0, 0));
    }

    #[test]
    fn single_smallest_run_is_reproducible() {
        let cfg = ExperimentConfig { monte_carlo: 1, n_ratios: vec![8.0], ..small() };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 1);
        assert!(a.rows[0].same_outcome(&b.rows[0]));
        assert_eq!(a.rows[0].n, 96);
    }

    #[test]
    fn table_layout_and_aggregates() {
        let cfg = small();
        let table = run_experiment(&cfg).unwrap();
        assert_eq!(table.rows.len(), 6);
        let ids: Vec<(usize, f64)> = table.rows.iter().map(|r| (r.run_id, r.n_ratio)).collect();
        assert_eq!(ids, vec![(0, 1.0), (0, 4.0), (1, 1.0), (1, 4.0), (2, 1.0), (2, 4.0)]);
        for r in &table.rows {
            assert!([r.tpr, r.fpr, r.dis, r.mean_kkt_residual].iter().all(|v| v.is_finite()));
        }
        let agg = table.aggregates();
        assert_eq!(agg.len(), 2);
        let dis: Vec<f64> = table.rows.iter().filter(|r| r.n_ratio == 4.0).map(|r| r.dis).collect();
        let mean = dis.iter().sum::<f64>() / 3.0;
        let std = (dis.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((agg[1].dis_mean - mean).abs() < 1e-15);
        assert!((agg[1].dis_std - std).abs() < 1e-15);
        assert_eq!(agg[1].runs, 3);
    }

    #[test]
    fn csv_round_trip_and_long_format() {
        let table = run_experiment(&small()).unwrap();
        let mut buf = Vec::new();
        table.write_rows(&mut buf).unwrap();
        let back = ResultTable::read_rows(buf.as_slice()).unwrap();
        assert!(back.rows.iter().zip(&table.rows).all(|(a, b)| a.same_outcome(b)));

        let mut long = Vec::new();
        table.write_long(&mut long).unwrap();
        let text = String::from_utf8(long).unwrap();
        assert!(text.starts_with("run_id,mode,n_ratio,N,metric,value\n"));
        assert!(text.contains("0,fir,1,12,dis,"));
    }

    #[test]
    fn replay_matches_full_run() {
        let cfg = small();
        let table = run_experiment(&cfg).unwrap();
        let replay = run_single(&cfg, 2).unwrap();
        let stored = table.rows_for_run(2);
        assert_eq!(replay.len(), stored.len());
        assert!(replay.iter().zip(&stored).all(|(a, b)| a.same_outcome(b)));
    }

    #[test]
    fn prefixes_are_nested() {
        let detail = run_instance(&small(), 0).unwrap();
        let cfg = small();
        let network = generate_network(&cfg.network_spec(), {
            let mut rng = ChaCha8Rng::seed_from_u64(detail.seed);
            rng.next_u64()
        })
        .unwrap();
        assert_eq!(network, detail.network);
        let long = simulate(&network, cfg.max_rows() + 3, cfg.burn_in, detail.simulation_seed).unwrap();
        let short = long.prefix(cfg.rows_for(1.0) + 3).unwrap();
        for i in 0..4 {
            assert_eq!(short.node(i), &long.node(i)[..short.len()]);
        }
        assert_eq!(detail.ratios[0].n, 12);
    }
}
