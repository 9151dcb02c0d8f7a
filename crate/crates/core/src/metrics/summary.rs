use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{aggregate, auroc, cost_effective, t_brier, t_ece, Aggregator, CalibrationRecord, CostPerSuccess, MetricsError};
use crate::controller::PolicyMode;
use crate::trajectory::TrajectoryRecord;

/// What "cost" means for cost per success.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostUnit {
    #[default]
    ModelCalls,
    Characters,
}

impl CostUnit {
    fn of(self, r: &TrajectoryRecord) -> u64 {
        match self {
            CostUnit::ModelCalls => r.cost.model_calls,
            CostUnit::Characters => r.cost.prompt_characters + r.cost.completion_characters,
        }
    }
}

/// One calibration record per trajectory that has at least one step.
pub fn calibration_records(records: &[TrajectoryRecord], aggregator: Aggregator) -> Vec<CalibrationRecord<f64>> {
    records
        .iter()
        .filter_map(|r| {
            let c = r.confidences();
            aggregate(&c, aggregator).ok().map(|b| CalibrationRecord::new(b, r.success))
        })
        .collect()
}

/// Triggered steps over all decided steps.
pub fn trigger_rate(records: &[TrajectoryRecord]) -> f64 {
    let steps: usize = records.iter().map(|r| r.audit.len()).sum();
    if steps == 0 {
        return 0.0;
    }
    records.iter().map(TrajectoryRecord::triggered_steps).sum::<usize>() as f64 / steps as f64
}

/// Mean initial and mean finalized confidence over triggered steps.
pub fn confidence_shift(records: &[TrajectoryRecord]) -> Option<(f64, f64)> {
    let mut initial = Vec::new();
    let mut finalized = Vec::new();
    for r in records {
        for a in r.audit.iter().filter(|a| a.triggered) {
            if let Some(e) = r.entries.get(a.step_index) {
                initial.push(a.initial_confidence.value());
                finalized.push(e.confidence.value());
            }
        }
    }
    if initial.is_empty() {
        return None;
    }
    let n = initial.len() as f64;
    Some((
        super::pairwise_sum(&initial) / n,
        super::pairwise_sum(&finalized) / n,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: PolicyMode,
    pub tau: f64,
    pub aggregator: Aggregator,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub t_ece: Option<f64>,
    pub t_brier: Option<f64>,
    /// Absent when the run has only one outcome class.
    pub auroc: Option<f64>,
    pub trigger_rate: f64,
    pub confidence_shift: Option<(f64, f64)>,
    pub mean_model_calls: f64,
    pub mean_steps: f64,
    pub cost_per_success: CostPerSuccess<f64>,
}

/// One row per (mode, tau, aggregator), in that order.
pub fn summarize(
    records: &[TrajectoryRecord],
    aggregators: &[Aggregator],
    bins: usize,
    unit: CostUnit,
) -> Result<Vec<MetricsRow>, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::Precondition("bins must be >= 1".into()));
    }
    let mut groups: BTreeMap<(PolicyMode, u64), Vec<TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.mode, r.tau.value().to_bits())).or_default().push(r.clone());
    }
    let mut rows = Vec::new();
    for ((mode, tau_bits), group) in &groups {
        let n = group.len();
        let successes = group.iter().filter(|r| r.success).count();
        let total_cost: u64 = group.iter().map(|r| unit.of(r)).sum();
        let cost = cost_effective(total_cost as f64, successes, n)?;
        let shift = confidence_shift(group);
        let rate = trigger_rate(group);
        let calls = group.iter().map(|r| r.cost.model_calls).sum::<u64>() as f64 / n as f64;
        let steps = group.iter().map(|r| r.cost.env_steps).sum::<u64>() as f64 / n as f64;
        for &agg in aggregators {
            let cal = calibration_records(group, agg);
            rows.push(MetricsRow {
                mode: *mode,
                tau: f64::from_bits(*tau_bits),
                aggregator: agg,
                episodes: n,
                successes,
                success_rate: successes as f64 / n as f64,
                t_ece: t_ece(&cal, bins).ok(),
                t_brier: t_brier(&cal).ok(),
                auroc: auroc(&cal).ok(),
                trigger_rate: rate,
                confidence_shift: shift,
                mean_model_calls: calls,
                mean_steps: steps,
                cost_per_success: cost,
            });
        }
    }
    Ok(rows)
}
