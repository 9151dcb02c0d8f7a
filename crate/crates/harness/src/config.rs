use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use auq_core::gateway::HttpConfig;
use auq_core::metrics::{Aggregator, CostUnit, DEFAULT_BINS};
use auq_core::{Confidence, PolicyConfig, PolicyMode};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const DEFAULT_TAU_GRID: [f64; 4] = [0.8, 0.85, 0.9, 0.95];

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatewayConfig {
    /// Scripted model driven by a TOML rule/planner document.
    Scripted { spec: PathBuf },
    /// Chat-completions endpoint; the key is read from `api_key_env`.
    Http(HttpConfig),
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig::Scripted {
            spec: PathBuf::from("data/scripts/planner.toml"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub bins: usize,
    pub aggregators: Vec<Aggregator>,
    pub cost_unit: CostUnit,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            aggregators: Aggregator::ALL.to_vec(),
            cost_unit: CostUnit::ModelCalls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyConfig,
    /// A scenario file or a directory of them.
    pub scenarios: PathBuf,
    /// Episodes per scenario.
    pub seeds: usize,
    pub master_seed: u64,
    pub gateway: GatewayConfig,
    pub out: PathBuf,
    /// Threshold grid for `sweep`.
    pub taus: Vec<f64>,
    /// Modes for `sweep`; empty means just `policy.mode`.
    pub modes: Vec<PolicyMode>,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: PolicyConfig::default(),
            scenarios: PathBuf::from("data/scenarios/efficacy"),
            seeds: 10,
            master_seed: 0,
            gateway: GatewayConfig::default(),
            out: PathBuf::from("runs"),
            taus: DEFAULT_TAU_GRID.to_vec(),
            modes: Vec::new(),
            workers: 0,
            report: ReportConfig::default(),
        }
    }
}

/// One (mode, tau) combination; each gets its own log file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mode: PolicyMode,
    pub tau: Confidence,
}

impl Cell {
    pub fn file_name(&self) -> String {
        format!("{}_tau{}.jsonl", self.mode.as_str(), self.tau)
    }

    pub fn policy(&self, base: &PolicyConfig) -> PolicyConfig {
        PolicyConfig {
            mode: self.mode,
            tau: self.tau,
            ..*base
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.policy.validate()?;
        if self.seeds == 0 {
            return Err(HarnessError::Config("seeds must be >= 1".into()));
        }
        if self.report.bins == 0 {
            return Err(HarnessError::Config("bins must be >= 1".into()));
        }
        if self.report.aggregators.is_empty() {
            return Err(HarnessError::Config("at least one aggregator is required".into()));
        }
        for &t in &self.taus {
            Confidence::new(t).map_err(|e| HarnessError::Config(format!("tau grid: {e}")))?;
            if t >= 1.0 {
                return Err(HarnessError::Config(format!("tau grid: {t} must be < 1")));
            }
        }
        Ok(())
    }

    /// The single cell `run` executes.
    pub fn run_cells(&self) -> Vec<Cell> {
        vec![Cell {
            mode: self.policy.mode,
            tau: self.policy.tau,
        }]
    }

    /// Every mode crossed with every tau, each exactly once, in a fixed order.
    pub fn sweep_cells(&self) -> Result<Vec<Cell>, HarnessError> {
        let modes: Vec<PolicyMode> = if self.modes.is_empty() {
            vec![self.policy.mode]
        } else {
            self.modes.clone()
        };
        let taus = if self.taus.is_empty() {
            vec![self.policy.tau.value()]
        } else {
            self.taus.clone()
        };
        let mut seen = BTreeSet::new();
        let mut cells = Vec::new();
        for &mode in &modes {
            for &t in &taus {
                let tau = Confidence::new(t).map_err(|e| HarnessError::Config(e.to_string()))?;
                if seen.insert((mode.as_str(), tau.value().to_bits())) {
                    cells.push(Cell { mode, tau });
                }
            }
        }
        Ok(cells)
    }
}
