//! Seeded text-world POMDP with precondition-chained goals and an
//! observation-only noise channel.

mod env;
mod scenario;
mod solver;
mod state;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ContractViolation;

pub use env::{normalize_command, TextWorld, NOTHING_HAPPENS};
pub use scenario::{GoalStep, LocationSpec, ObjectSpec, Scenario, DEFAULT_DECOYS};
pub use solver::{oracle_solve, solve_from};
pub use state::{Effect, EnvState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario io error: {0}")]
    Io(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Contract(#[from] ContractViolation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    /// Canonical (sorted) admissible commands.
    pub admissible: Vec<String>,
    /// The noise channel rewrote this text. Logged, never shown to the agent.
    pub corrupted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub done: bool,
    pub success: bool,
}

/// What the controller needs from an environment.
pub trait Environment: Send {
    fn task(&self) -> &str;
    fn scenario_id(&self) -> &str;
    fn max_steps(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Observation;
    fn step(&mut self, action: &str) -> Result<StepResult, WorldError>;
}

/// Load every `*.toml` scenario in a directory, sorted by id.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<Scenario>, WorldError> {
    let dir = dir.as_ref();
    let rd = std::fs::read_dir(dir).map_err(|e| WorldError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut out = paths.iter().map(Scenario::load).collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    for w in out.windows(2) {
        if w[0].id == w[1].id {
            return Err(WorldError::Invalid(format!("duplicate scenario id {}", w[0].id)));
        }
    }
    Ok(out)
}
