//! Trajectory-level calibration, discrimination, forward validity, cost
//! and paired-outcome analytics.

mod calibration;
mod quadrants;
mod summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use calibration::{
    aggregate, auroc, bin_index, reliability_bins, t_brier, t_ece, Aggregator, CalibrationRecord,
};
pub use quadrants::{outcome_quadrants, quadrants_from_outcomes, QuadrantCell, QuadrantReport};
pub use summary::{calibration_records, confidence_shift, summarize, trigger_rate, CostUnit, MetricsRow};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("discrimination undefined with {successes} successes and {failures} failures")]
    UndefinedDiscrimination { successes: usize, failures: usize },
    #[error("unpaired record: {0}")]
    Pairing(String),
}

/// Deterministic pairwise (cascade) summation.
pub fn pairwise_sum<S: Scalar>(xs: &[S]) -> S {
    match xs.len() {
        0 => S::zero(),
        1 => xs[0],
        n if n <= 8 => xs.iter().copied().fold(S::zero(), |a, b| a + b),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityMode {
    Product,
    Minimum,
}

/// Running estimate of the probability that the trajectory is still valid.
pub fn forward_validity<S: Scalar>(confidences: &[S], mode: ValidityMode) -> Result<Vec<S>, MetricsError> {
    if confidences.iter().any(|&c| !(c >= S::zero() && c <= S::one())) {
        return Err(MetricsError::Precondition("confidences must lie in [0, 1]".into()));
    }
    let mut acc = S::one();
    Ok(confidences
        .iter()
        .map(|&c| {
            acc = match mode {
                ValidityMode::Product => acc * c,
                ValidityMode::Minimum => acc.min(c),
            };
            acc
        })
        .collect())
}

/// Cost per success; `Unbounded` when nothing succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostPerSuccess<S> {
    Finite(S),
    Unbounded,
}

impl<S: Scalar> CostPerSuccess<S> {
    pub fn finite(self) -> Option<S> {
        match self {
            CostPerSuccess::Finite(v) => Some(v),
            CostPerSuccess::Unbounded => None,
        }
    }
}

pub fn cost_effective<S: Scalar>(
    total_cost: S,
    success_count: usize,
    total_count: usize,
) -> Result<CostPerSuccess<S>, MetricsError> {
    if total_count == 0 || success_count > total_count {
        return Err(MetricsError::Precondition(format!(
            "{success_count} successes out of {total_count} episodes"
        )));
    }
    if success_count == 0 {
        return Ok(CostPerSuccess::Unbounded);
    }
    // mean cost over success rate reduces to cost per success
    Ok(CostPerSuccess::Finite(total_cost / S::from_usize(success_count).expect("fits")))
}

/// Inputs to the wall-clock comparison between a baseline needing `l`
/// steps and a dual-process agent needing `l_prime`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel<S> {
    pub l: S,
    pub l_prime: S,
    /// Fraction of steps that trigger System 2.
    pub p: S,
    /// Inference cost multiplier of a System 2 step.
    pub k: S,
    pub t_inf: S,
    pub t_env: S,
}

/// True iff the dual-process agent finishes strictly sooner.
pub fn latency_tradeoff<S: Scalar>(m: &LatencyModel<S>) -> Result<bool, MetricsError> {
    let positive = [m.l, m.l_prime, m.k, m.t_inf, m.t_env].iter().all(|&v| v > S::zero());
    if !positive || !(m.p >= S::zero() && m.p <= S::one()) {
        return Err(MetricsError::Precondition("inputs must be positive and p in [0, 1]".into()));
    }
    let base = m.t_inf + m.t_env;
    let dual = m.l_prime * ((S::one() - m.p) * base + m.p * (m.k * m.t_inf + m.t_env));
    Ok(dual < m.l * base)
}

/// Minimal record: one memory entry and audit per confidence, the first
/// `triggered` steps flagged as System 2 steps starting from `initial`.
#[cfg(test)]
pub(crate) fn fixture_record(
    scenario: &str,
    seed: u64,
    confidences: &[f64],
    triggered: usize,
    initial: f64,
    success: bool,
) -> crate::trajectory::TrajectoryRecord {
    use crate::confidence::Confidence;
    use crate::controller::PolicyMode;
    use crate::memory::MemoryEntry;
    use crate::trajectory::{CostLedger, StepAudit, TerminationReason, TrajectoryRecord};

    let entries: Vec<MemoryEntry> = confidences
        .iter()
        .enumerate()
        .map(|(i, &c)| MemoryEntry {
            step_index: i,
            observation: format!("obs {i}"),
            action: "look".into(),
            confidence: Confidence::new(c).unwrap(),
            explanation: String::new(),
            reflected: i < triggered,
            expanded: false,
        })
        .collect();
    let audit = entries
        .iter()
        .map(|e| StepAudit {
            step_index: e.step_index,
            observation: e.observation.clone(),
            observation_corrupted: false,
            prompt_hash: String::new(),
            raw_completion: String::new(),
            reprompted: false,
            parse_failure: None,
            warnings: Vec::new(),
            initial_action: "look".into(),
            initial_confidence: if e.reflected { Confidence::new(initial).unwrap() } else { e.confidence },
            initial_explanation: String::new(),
            triggered: e.reflected,
            candidates: Vec::new(),
            votes: Vec::new(),
            discarded: Vec::new(),
            selection_score: None,
            first_pass_score: None,
            expanded: false,
            reflection_exhausted: false,
            result: None,
        })
        .collect();
    let n = confidences.len() as u64;
    TrajectoryRecord {
        episode_id: format!("{scenario}#{seed:04}"),
        scenario_id: scenario.into(),
        seed,
        mode: PolicyMode::Dual,
        tau: Confidence::new(0.9).unwrap(),
        entries,
        audit,
        success,
        terminated_reason: if success { TerminationReason::Goal } else { TerminationReason::StepLimit },
        cost: CostLedger {
            model_calls: n + 3 * triggered as u64,
            env_steps: n,
            system2_triggers: triggered as u64,
            ..CostLedger::default()
        },
    }
}
