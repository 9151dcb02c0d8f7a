use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::trajectory::TrajectoryRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadrantCell {
    pub count: usize,
    /// Mean environment steps of the treated run over this quadrant.
    pub mean_steps: Option<f64>,
}

/// Paired outcome comparison of a baseline run against a treated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadrantReport {
    pub shared_success: QuadrantCell,
    pub shared_failure: QuadrantCell,
    /// Baseline failed, treated succeeded.
    pub correction: QuadrantCell,
    /// Baseline succeeded, treated failed.
    pub regression: QuadrantCell,
}

impl QuadrantReport {
    pub fn total(&self) -> usize {
        self.shared_success.count + self.shared_failure.count + self.correction.count + self.regression.count
    }

    /// Percentages in the order shared success, shared failure,
    /// correction, regression.
    pub fn percentages(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        [
            self.shared_success.count,
            self.shared_failure.count,
            self.correction.count,
            self.regression.count,
        ]
        .map(|c| 100.0 * c as f64 / n)
    }
}

/// Quadrants from bare `(baseline_success, treated_success, treated_steps)`
/// triples.
pub fn quadrants_from_outcomes(pairs: &[(bool, bool, u64)]) -> QuadrantReport {
    let mut steps: [Vec<u64>; 4] = Default::default();
    for &(b, t, s) in pairs {
        let q = match (b, t) {
            (true, true) => 0,
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
        };
        steps[q].push(s);
    }
    let cell = |v: &Vec<u64>| QuadrantCell {
        count: v.len(),
        mean_steps: (!v.is_empty()).then(|| v.iter().sum::<u64>() as f64 / v.len() as f64),
    };
    QuadrantReport {
        shared_success: cell(&steps[0]),
        shared_failure: cell(&steps[1]),
        correction: cell(&steps[2]),
        regression: cell(&steps[3]),
    }
}

/// Pair records by `(scenario_id, seed)` and classify each pair.
pub fn outcome_quadrants(
    baseline: &[TrajectoryRecord],
    treated: &[TrajectoryRecord],
) -> Result<QuadrantReport, MetricsError> {
    let key = |r: &TrajectoryRecord| (r.scenario_id.clone(), r.seed);
    let mut partners: BTreeMap<(String, u64), &TrajectoryRecord> = BTreeMap::new();
    for t in treated {
        if partners.insert(key(t), t).is_some() {
            return Err(MetricsError::Pairing(format!(
                "treated run has duplicate ({}, {})",
                t.scenario_id, t.seed
            )));
        }
    }
    let mut seen = BTreeMap::new();
    let mut pairs = Vec::with_capacity(baseline.len());
    for b in baseline {
        let k = key(b);
        let t = partners.get(&k).ok_or_else(|| {
            MetricsError::Pairing(format!("baseline episode {} ({}, {}) has no partner", b.episode_id, k.0, k.1))
        })?;
        if seen.insert(k.clone(), ()).is_some() {
            return Err(MetricsError::Pairing(format!("baseline has duplicate ({}, {})", k.0, k.1)));
        }
        pairs.push((b.success, t.success, t.cost.env_steps));
    }
    if let Some((k, t)) = partners.iter().find(|(k, _)| !seen.contains_key(*k)) {
        return Err(MetricsError::Pairing(format!(
            "treated episode {} ({}, {}) has no partner",
            t.episode_id, k.0, k.1
        )));
    }
    Ok(quadrants_from_outcomes(&pairs))
}
