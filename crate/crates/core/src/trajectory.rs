//! Completed episodes and the per-step audit trail behind them.

use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;
use crate::controller::PolicyMode;
use crate::elicitation::ParseWarning;
use crate::memory::MemoryEntry;
use crate::reflection::{DiscardedSample, ReflectionCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Goal,
    StepLimit,
    EnvironmentError,
}

/// Logical work done by one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub model_calls: u64,
    pub prompt_characters: u64,
    pub completion_characters: u64,
    pub env_steps: u64,
    pub system2_triggers: u64,
    pub expansions: u64,
}

impl CostLedger {
    pub fn is_consistent(&self) -> bool {
        self.system2_triggers <= self.env_steps && self.expansions <= self.system2_triggers
    }

    pub fn add(&mut self, other: &CostLedger) {
        self.model_calls += other.model_calls;
        self.prompt_characters += other.prompt_characters;
        self.completion_characters += other.completion_characters;
        self.env_steps += other.env_steps;
        self.system2_triggers += other.system2_triggers;
        self.expansions += other.expansions;
    }
}

/// What the environment returned for a finalized action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvOutcome {
    pub observation: String,
    pub done: bool,
    pub success: bool,
    pub corrupted: bool,
}

/// Everything that happened inside one decision, for offline analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub step_index: usize,
    pub observation: String,
    /// The observation above was rewritten by the noise channel.
    pub observation_corrupted: bool,
    /// Hex SHA-256 of the System 1 prompt.
    pub prompt_hash: String,
    pub raw_completion: String,
    pub reprompted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_failure: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ParseWarning>,
    pub initial_action: String,
    pub initial_confidence: Confidence,
    pub initial_explanation: String,
    pub triggered: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<ReflectionCandidate>,
    /// Self-consistency votes (cot_sc only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub votes: Vec<ReflectionCandidate>,
    /// Reflection or vote samples that failed to parse.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discarded: Vec<DiscardedSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_score: Option<f64>,
    /// Winning score of the limited-window pass when expansion followed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_pass_score: Option<f64>,
    pub expanded: bool,
    pub reflection_exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<EnvOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode_id: String,
    pub scenario_id: String,
    pub seed: u64,
    pub mode: PolicyMode,
    pub tau: Confidence,
    pub entries: Vec<MemoryEntry>,
    pub audit: Vec<StepAudit>,
    pub success: bool,
    pub terminated_reason: TerminationReason,
    pub cost: CostLedger,
}

impl TrajectoryRecord {
    pub fn confidences(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.confidence.value()).collect()
    }

    pub fn triggered_steps(&self) -> usize {
        self.audit.iter().filter(|a| a.triggered).count()
    }

    /// Steps whose initial proposal fell strictly below `tau`.
    pub fn low_confidence_steps(&self) -> usize {
        self.audit
            .iter()
            .filter(|a| a.initial_confidence.value() < self.tau.value())
            .count()
    }
}
