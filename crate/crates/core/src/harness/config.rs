use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{EdgeMode, NetworkSpec, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::spice::SolverConfig;

/// Monte-Carlo experiment settings.
///
/// JSON schema (every field optional, defaults shown):
///
/// ```json
/// {
///   "J": 8, "K": 3, "rho": 0.25, "mode": "fir", "order_range": [1, 5],
///   "n_ratios": [0.5, 1, 2, 4, 8], "monte_carlo": 50, "delta": 0.1,
///   "master_seed": 0, "burn_in": 500, "workers": null,
///   "solver": { "max_iterations": 1000, "rel_tol": 1e-8, "kkt_tol": 1e-6,
///               "power_floor": 1e-12, "lambda_scale": "inv_sqrt_n",
///               "noise_weight": 1.0 }
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "J")]
    pub nodes: usize,
    #[serde(rename = "K")]
    pub lags: usize,
    pub rho: f64,
    pub mode: EdgeMode,
    pub order_range: (usize, usize),
    /// Sample counts as multiples of `J·K`.
    pub n_ratios: Vec<f64>,
    pub monte_carlo: usize,
    pub delta: f64,
    pub master_seed: u64,
    pub burn_in: usize,
    /// Worker threads; `None` defers to `NETSPICE_WORKERS`, then to all cores.
    pub workers: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nodes: 8,
            lags: 3,
            rho: 0.25,
            mode: EdgeMode::Fir,
            order_range: (1, 5),
            n_ratios: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            monte_carlo: 50,
            delta: 0.1,
            master_seed: 0,
            burn_in: DEFAULT_BURN_IN,
            workers: None,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.nodes < 2 {
            return bad(format!("J must be at least 2, got {}", self.nodes));
        }
        if self.lags == 0 || self.monte_carlo == 0 {
            return bad("K and monte_carlo must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must be in (0, 1], got {}", self.rho));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.n_ratios.is_empty() || self.n_ratios.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return bad("n_ratios must be nonempty and positive".into());
        }
        if self.n_ratios.windows(2).any(|w| w[0] > w[1]) {
            return bad("n_ratios must be sorted ascending".into());
        }
        let (lo, hi) = self.order_range;
        if !(1 <= lo && lo <= hi) {
            return bad(format!("invalid order range ({lo}, {hi})"));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        self.solver.validate()
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            nodes: self.nodes,
            rho: self.rho,
            taps: self.lags,
            mode: self.mode,
            order_range: self.order_range,
        }
    }

    /// Regression rows for a ratio: `max(1, round(ratio · J · K))`.
    pub fn rows_for(&self, ratio: f64) -> usize {
        ((ratio * (self.nodes * self.lags) as f64).round() as usize).max(1)
    }

    pub fn max_rows(&self) -> usize {
        self.n_ratios.iter().map(|&r| self.rows_for(r)).max().unwrap_or(1)
    }
}

/// Worker count from the config, then `NETSPICE_WORKERS`.
pub fn resolve_workers(configured: Option<usize>) -> Option<usize> {
    configured.or_else(|| {
        std::env::var("NETSPICE_WORKERS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n: &usize| n > 0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_files() {
        let cfg = ExperimentConfig::from_json(r#"{"mode": "rational", "monte_carlo": 3}"#).unwrap();
        assert_eq!(cfg.mode, EdgeMode::Rational);
        assert_eq!(cfg.monte_carlo, 3);
        assert_eq!(cfg.nodes, 8);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.rows_for(1.0), 24);
        assert_eq!(cfg.rows_for(0.5), 12);
        assert_eq!(cfg.max_rows(), 192);
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig { master_seed: 42, ..Default::default() };
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ExperimentConfig::from_json(r#"{"n_ratios": [2, 1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"rho": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"J": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"solver": {"kkt_tol": -1}}"#).is_err());
    }
}
