use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netspice::datagen::{generate_network, simulate, true_predictor_taps, EdgeMode, GroundTruthNetwork};
use netspice::harness::{estimate_network, run_experiment, run_single, ExperimentConfig, ResultTable};
use netspice::metrics::{nmse, topology_score};
use netspice::netmodel::{NetworkEstimate, TimeSeries};
use netspice::spice::SolverConfig;
use netspice::{Error, Result};

#[derive(Parser)]
#[command(name = "netspice", version, about = "Sparse dynamic network identification with SPICE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct Overrides {
    #[arg(long = "J")]
    nodes: Option<usize>,
    #[arg(long = "K")]
    lags: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<EdgeMode>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    monte_carlo: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_ratios: Option<Vec<f64>>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a stable network and simulate it.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Seed for the network; the simulation uses seed + 1.
        #[arg(long)]
        seed: Option<u64>,
        /// Samples to keep; defaults to the largest experiment size plus K.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = "generated")]
        out: PathBuf,
    },
    /// Estimate a network from a CSV time series.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "K")]
        lags: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value = "network.json")]
        output: PathBuf,
        /// Per-node solver records as JSON.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long)]
        solver: Option<PathBuf>,
    },
    /// Score an estimated network against a ground-truth network.
    Evaluate {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Scores CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a Monte-Carlo experiment.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory; defaults to results/<config stem>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run one Monte-Carlo run from its seed.
    Replay {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        run: usize,
        /// Rows CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<EdgeMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown mode {s}"))
}

fn load_config(path: Option<&Path>, o: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = o.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = o.lags {
        cfg.lags = v;
    }
    if let Some(v) = o.rho {
        cfg.rho = v;
    }
    if let Some(v) = o.mode {
        cfg.mode = v;
    }
    if let Some(v) = o.delta {
        cfg.delta = v;
    }
    if let Some(v) = o.master_seed {
        cfg.master_seed = v;
    }
    if let Some(v) = o.monte_carlo {
        cfg.monte_carlo = v;
    }
    if let Some(v) = o.n_ratios {
        cfg.n_ratios = v;
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn io::Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, overrides, seed, samples, out } => {
            let cfg = load_config(config.as_deref(), overrides)?;
            let seed = seed.unwrap_or(cfg.master_seed);
            let net = generate_network(&cfg.network_spec(), seed)?;
            let samples = samples.unwrap_or(cfg.max_rows() + cfg.lags);
            let w = simulate(&net, samples, cfg.burn_in, seed.wrapping_add(1))?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("network.json"), net.to_json()?)?;
            w.write_csv(fs::File::create(out.join("series.csv"))?)?;
            let taps = true_predictor_taps(&net, cfg.lags)?;
            fs::write(out.join("truth_taps.json"), serde_json::to_string_pretty(&taps)?)?;
        }
        Command::Estimate { input, lags, delta, output, diagnostics, solver } => {
            let solver = match solver {
                Some(p) => serde_json::from_str::<SolverConfig>(&fs::read_to_string(p)?)?,
                None => SolverConfig::default(),
            };
            let w = TimeSeries::read_csv(fs::File::open(&input)?)?;
            let (net, nodes) = estimate_network(&w, lags, delta, &solver)?;
            fs::write(&output, net.to_json()?)?;
            if let Some(path) = diagnostics {
                fs::write(path, serde_json::to_string_pretty(&nodes)?)?;
            }
        }
        Command::Evaluate { estimate, truth, output } => {
            let est = NetworkEstimate::from_json(&fs::read_to_string(estimate)?)?;
            let net = GroundTruthNetwork::from_json(&fs::read_to_string(truth)?)?;
            let score = topology_score(&est.adjacency, &net.adjacency)?;
            let mut rows: Vec<(&str, f64)> = vec![
                ("tpr", score.tpr),
                ("fpr", score.fpr),
                ("dis", score.dis),
                ("true_edges", score.true_edges as f64),
                ("false_edges", score.false_edges as f64),
            ];
            match nmse(&est.thetas(), &true_predictor_taps(&net, est.lags)?) {
                Ok(s) => rows.push(("nmse", s.nmse)),
                Err(Error::Undefined(_)) => {}
                Err(e) => return Err(e),
            }
            let mut out = csv::Writer::from_writer(output_writer(output.as_deref())?);
            out.write_record(["metric", "value"])?;
            for (metric, value) in rows {
                out.write_record([metric.to_string(), value.to_string()])?;
            }
            out.flush()?;
        }
        Command::Experiment { config, overrides, out } => {
            let stem = config
                .as_deref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "default".into());
            let cfg = load_config(config.as_deref(), overrides)?;
            let dir = out.unwrap_or_else(|| Path::new("results").join(stem));
            let table = run_experiment(&cfg)?;
            table.write_dir(&dir)?;
            fs::write(dir.join("config.json"), cfg.to_json()?)?;
        }
        Command::Replay { config, overrides, run, output } => {
            let cfg = load_config(config.as_deref(), overrides)?;
            if run >= cfg.monte_carlo {
                return Err(Error::IndexOutOfRange(format!(
                    "run {run} outside 0..{}",
                    cfg.monte_carlo
                )));
            }
            let table = ResultTable::new(run_single(&cfg, run)?);
            table.write_rows(output_writer(output.as_deref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
