//! Metric tables over logged runs.

use std::fmt::Write as _;
use std::path::Path;

use auq_core::metrics::{outcome_quadrants, summarize, CostPerSuccess, MetricsRow, QuadrantReport};
use auq_core::TrajectoryRecord;
use serde::{Deserialize, Serialize};

use crate::config::ReportConfig;
use crate::error::HarnessError;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub treated: String,
    pub quadrants: QuadrantReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<MetricsRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

pub fn load_records(paths: &[impl AsRef<Path>]) -> Result<Vec<TrajectoryRecord>, HarnessError> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read(p.as_ref())?.records);
    }
    Ok(out)
}

pub fn build(records: &[TrajectoryRecord], config: &ReportConfig) -> Result<Report, HarnessError> {
    Ok(Report {
        rows: summarize(records, &config.aggregators, config.bins, config.cost_unit)?,
        comparison: None,
    })
}

/// Paired comparison of two runs over the same (scenario, seed) episodes.
pub fn compare(
    baseline_label: &str,
    baseline: &[TrajectoryRecord],
    treated_label: &str,
    treated: &[TrajectoryRecord],
) -> Result<Comparison, HarnessError> {
    Ok(Comparison {
        baseline: baseline_label.to_string(),
        treated: treated_label.to_string(),
        quadrants: outcome_quadrants(baseline, treated)?,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub fn to_markdown(report: &Report) -> String {
    let mut s = String::new();
    s.push_str("| mode | tau | agg | episodes | SR | T-ECE | T-Brier | AUROC | trigger rate | conf shift | calls | steps | cost/success |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        let shift = r
            .confidence_shift
            .map_or_else(|| "-".to_string(), |(a, b)| format!("{a:.3} -> {b:.3}"));
        let cost = match r.cost_per_success {
            CostPerSuccess::Finite(c) => format!("{c:.2}"),
            CostPerSuccess::Unbounded => "unbounded".to_string(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.3} | {} | {} | {} | {:.3} | {} | {:.2} | {:.2} | {} |",
            r.mode.as_str(),
            r.tau,
            r.aggregator,
            r.episodes,
            r.success_rate,
            opt(r.t_ece),
            opt(r.t_brier),
            opt(r.auroc),
            r.trigger_rate,
            shift,
            r.mean_model_calls,
            r.mean_steps,
            cost
        );
    }
    if let Some(c) = &report.comparison {
        let q = &c.quadrants;
        let pct = q.percentages();
        let _ = writeln!(s, "\nPaired outcomes, {} (baseline) vs {} (treated):\n", c.baseline, c.treated);
        s.push_str("| quadrant | count | % | mean steps |\n|---|---|---|---|\n");
        for (i, (name, cell)) in [
            ("shared success", q.shared_success),
            ("shared failure", q.shared_failure),
            ("correction", q.correction),
            ("regression", q.regression),
        ]
        .into_iter()
        .enumerate()
        {
            let _ = writeln!(s, "| {name} | {} | {:.1} | {} |", cell.count, pct[i], opt(cell.mean_steps));
        }
    }
    s
}

pub fn to_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("report is always serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use auq_core::metrics::Aggregator;
    use auq_core::{Confidence, CostLedger, PolicyMode, TerminationReason};

    fn failed(id: &str) -> TrajectoryRecord {
        TrajectoryRecord {
            episode_id: id.into(),
            scenario_id: "s".into(),
            seed: 1,
            mode: PolicyMode::React,
            tau: Confidence::new(0.85).unwrap(),
            entries: Vec::new(),
            audit: Vec::new(),
            success: false,
            terminated_reason: TerminationReason::StepLimit,
            cost: CostLedger {
                model_calls: 4,
                ..CostLedger::default()
            },
        }
    }

    #[test]
    fn zero_successes_render_as_unbounded() {
        let cfg = ReportConfig {
            aggregators: vec![Aggregator::Last, Aggregator::Min],
            ..ReportConfig::default()
        };
        let rep = build(&[failed("a"), failed("b")], &cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].success_rate, 0.0);
        assert_eq!(rep.rows[0].cost_per_success, CostPerSuccess::Unbounded);
        assert!(rep.rows[0].auroc.is_none());
        let md = to_markdown(&rep);
        assert!(md.contains("unbounded"));
        let back: Report = serde_json::from_str(&to_json(&rep)).unwrap();
        assert_eq!(back, rep);
    }
}
