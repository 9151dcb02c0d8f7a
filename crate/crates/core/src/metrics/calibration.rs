use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{pairwise_sum, MetricsError};
use crate::Scalar;

/// Trajectory confidence aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Last,
    Avg,
    Min,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Last, Aggregator::Avg, Aggregator::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Last => "last",
            Aggregator::Avg => "avg",
            Aggregator::Min => "min",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "last" => Ok(Aggregator::Last),
            "avg" | "mean" => Ok(Aggregator::Avg),
            "min" => Ok(Aggregator::Min),
            other => Err(MetricsError::Precondition(format!("unknown aggregator {other:?}"))),
        }
    }
}

pub fn aggregate<S: Scalar>(confidences: &[S], aggregator: Aggregator) -> Result<S, MetricsError> {
    let last = *confidences
        .last()
        .ok_or_else(|| MetricsError::Precondition("a zero-step trajectory has no belief".into()))?;
    Ok(match aggregator {
        Aggregator::Last => last,
        Aggregator::Avg => pairwise_sum(confidences) / S::from_usize(confidences.len()).expect("length fits"),
        Aggregator::Min => confidences.iter().copied().fold(S::infinity(), S::min),
    })
}

/// One trajectory's aggregated belief and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord<S> {
    pub trajectory_belief: S,
    pub success: bool,
}

impl<S: Scalar> CalibrationRecord<S> {
    pub fn new(trajectory_belief: S, success: bool) -> Self {
        Self {
            trajectory_belief,
            success,
        }
    }

    fn label(&self) -> S {
        if self.success {
            S::one()
        } else {
            S::zero()
        }
    }
}

fn check_beliefs<S: Scalar>(records: &[CalibrationRecord<S>]) -> Result<(), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Precondition("no records".into()));
    }
    if records
        .iter()
        .any(|r| !(r.trajectory_belief >= S::zero() && r.trajectory_belief <= S::one()))
    {
        return Err(MetricsError::Precondition("beliefs must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Equal-width bin for a belief; 1.0 lands in the top bin and interior
/// edges belong to the bin above them.
pub fn bin_index<S: Scalar>(belief: S, bins: usize) -> usize {
    let m = S::from_usize(bins).expect("bin count fits");
    let i = (belief * m).floor().to_usize().unwrap_or(0);
    i.min(bins - 1)
}

/// Per-bin (count, mean belief, accuracy) for reliability tables.
pub fn reliability_bins<S: Scalar>(
    records: &[CalibrationRecord<S>],
    bins: usize,
) -> Result<Vec<(usize, Option<S>, Option<S>)>, MetricsError> {
    check_beliefs(records)?;
    if bins == 0 {
        return Err(MetricsError::Precondition("bins must be >= 1".into()));
    }
    let mut beliefs: Vec<Vec<S>> = vec![Vec::new(); bins];
    let mut labels: Vec<Vec<S>> = vec![Vec::new(); bins];
    for r in records {
        let b = bin_index(r.trajectory_belief, bins);
        beliefs[b].push(r.trajectory_belief);
        labels[b].push(r.label());
    }
    Ok(beliefs
        .iter()
        .zip(&labels)
        .map(|(b, l)| {
            if b.is_empty() {
                (0, None, None)
            } else {
                let n = S::from_usize(b.len()).expect("length fits");
                (b.len(), Some(pairwise_sum(b) / n), Some(pairwise_sum(l) / n))
            }
        })
        .collect())
}

pub fn t_ece<S: Scalar>(records: &[CalibrationRecord<S>], bins: usize) -> Result<S, MetricsError> {
    let table = reliability_bins(records, bins)?;
    let n = S::from_usize(records.len()).expect("length fits");
    let terms: Vec<S> = table
        .iter()
        .filter_map(|&(count, conf, acc)| {
            let w = S::from_usize(count).expect("count fits") / n;
            Some(w * (acc? - conf?).abs())
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

pub fn t_brier<S: Scalar>(records: &[CalibrationRecord<S>]) -> Result<S, MetricsError> {
    check_beliefs(records)?;
    let sq: Vec<S> = records
        .iter()
        .map(|r| {
            let d = r.trajectory_belief - r.label();
            d * d
        })
        .collect();
    Ok(pairwise_sum(&sq) / S::from_usize(records.len()).expect("length fits"))
}

/// P(success belief > failure belief) + 0.5 P(tie), counted over every
/// success/failure pair.
pub fn auroc<S: Scalar>(records: &[CalibrationRecord<S>]) -> Result<S, MetricsError> {
    check_beliefs(records)?;
    let pos: Vec<S> = records.iter().filter(|r| r.success).map(|r| r.trajectory_belief).collect();
    let neg: Vec<S> = records.iter().filter(|r| !r.success).map(|r| r.trajectory_belief).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::UndefinedDiscrimination {
            successes: pos.len(),
            failures: neg.len(),
        });
    }
    // doubled counts keep the tie half-credit in integers
    let mut twice: u128 = 0;
    for &p in &pos {
        for &q in &neg {
            twice += if p > q {
                2
            } else if p == q {
                1
            } else {
                0
            };
        }
    }
    let pairs = 2 * pos.len() as u128 * neg.len() as u128;
    Ok(S::from_u128(twice).expect("fits") / S::from_u128(pairs).expect("fits"))
}
