use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;
use crate::error::ContractViolation;

/// Scores closer than this are treated as tied.
pub const SCORE_TIE_EPSILON: f64 = 1e-9;

/// One sampled System 2 path after refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionCandidate {
    pub sample_index: u32,
    pub iteration: u32,
    pub action: String,
    pub canonical_action: String,
    pub confidence: Confidence,
    pub explanation: String,
    pub used_expanded_memory: bool,
    #[serde(default)]
    pub raw: String,
}

impl ReflectionCandidate {
    /// Convenience constructor with the default string canonicalization.
    pub fn simple(sample_index: u32, action: &str, confidence: f64) -> Self {
        Self {
            sample_index,
            iteration: 1,
            action: action.to_string(),
            canonical_action: normalize_action(action),
            confidence: Confidence::new(confidence).expect("confidence in [0, 1]"),
            explanation: String::new(),
            used_expanded_memory: false,
            raw: String::new(),
        }
    }
}

/// Inner `<action>` text if present, lowercased, whitespace collapsed.
pub fn normalize_action(action: &str) -> String {
    let lower = action.to_lowercase();
    let inner = match (lower.find("<action>"), lower.find("</action>")) {
        (Some(i), Some(j)) if j >= i + 8 => &lower[i + 8..j],
        _ => lower.as_str(),
    };
    inner.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decides when two actions count as the same strategy.
pub trait ActionEquivalence: Send + Sync {
    fn canonical(&self, action: &str) -> String;
}

/// The default: normalized string equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizedMatch;

impl ActionEquivalence for NormalizedMatch {
    fn canonical(&self, action: &str) -> String {
        normalize_action(action)
    }
}

pub type Clusters<'a> = BTreeMap<String, Vec<&'a ReflectionCandidate>>;

/// Partition by canonical action; members keep input order.
pub fn cluster_actions(candidates: &[ReflectionCandidate]) -> Result<Clusters<'_>, ContractViolation> {
    if candidates.is_empty() {
        return Err(ContractViolation::new("cluster_actions", "no candidates"));
    }
    let mut out: Clusters<'_> = BTreeMap::new();
    for c in candidates {
        out.entry(c.canonical_action.clone()).or_default().push(c);
    }
    Ok(out)
}

/// `S(a) = (1/n) * sum of member confidences`.
pub fn consistency_score(clusters: &Clusters<'_>, n_total: usize) -> Result<BTreeMap<String, f64>, ContractViolation> {
    let members: usize = clusters.values().map(Vec::len).sum();
    if n_total == 0 || members != n_total {
        return Err(ContractViolation::new(
            "consistency_score",
            format!("n_total {n_total} does not match {members} clustered candidates"),
        ));
    }
    Ok(clusters
        .iter()
        .map(|(a, m)| {
            let sum: f64 = m.iter().map(|c| c.confidence.value()).sum();
            (a.clone(), sum / n_total as f64)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: ReflectionCandidate,
    pub score: f64,
    pub cluster_sizes: BTreeMap<String, usize>,
    pub scores: BTreeMap<String, f64>,
    pub all_candidates: Vec<ReflectionCandidate>,
}

fn mean_confidence(members: &[&ReflectionCandidate]) -> f64 {
    members.iter().map(|c| c.confidence.value()).sum::<f64>() / members.len() as f64
}

fn cmp_tolerant(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= SCORE_TIE_EPSILON {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

/// Argmax over clusters. Ties go to the larger cluster, then the higher
/// mean confidence, then the lexicographically smaller action. The
/// representative is the most confident member, then the lowest index.
pub fn select(scores: &BTreeMap<String, f64>, candidates: &[ReflectionCandidate]) -> Result<SelectionOutcome, ContractViolation> {
    if scores.is_empty() {
        return Err(ContractViolation::new("select", "no scores"));
    }
    let clusters = cluster_actions(candidates)?;
    let mut best: Option<(&String, f64, &Vec<&ReflectionCandidate>)> = None;
    // BTreeMap iteration is lexicographic, so keeping the incumbent on a
    // full tie implements the final tie-break.
    for (action, &score) in scores {
        let members = clusters.get(action).ok_or_else(|| {
            ContractViolation::new("select", format!("score for {action:?} has no cluster"))
        })?;
        let better = match best {
            None => true,
            Some((_, bs, bm)) => cmp_tolerant(score, bs)
                .then(members.len().cmp(&bm.len()))
                .then(cmp_tolerant(mean_confidence(members), mean_confidence(bm)))
                == Ordering::Greater,
        };
        if better {
            best = Some((action, score, members));
        }
    }
    let (_, score, members) = best.expect("scores non-empty");
    let chosen = members
        .iter()
        .copied()
        .max_by(|a, b| {
            a.confidence
                .value()
                .partial_cmp(&b.confidence.value())
                .unwrap_or(Ordering::Equal)
                .then(b.sample_index.cmp(&a.sample_index))
        })
        .expect("clusters are non-empty")
        .clone();
    Ok(SelectionOutcome {
        chosen,
        score,
        cluster_sizes: clusters.iter().map(|(a, m)| (a.clone(), m.len())).collect(),
        scores: scores.clone(),
        all_candidates: candidates.to_vec(),
    })
}

/// Cluster, score and select in one call.
pub fn choose(candidates: &[ReflectionCandidate]) -> Result<SelectionOutcome, ContractViolation> {
    let clusters = cluster_actions(candidates)?;
    let scores = consistency_score(&clusters, candidates.len())?;
    select(&scores, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cands(spec: &[(&str, f64)]) -> Vec<ReflectionCandidate> {
        spec.iter()
            .enumerate()
            .map(|(i, (a, c))| ReflectionCandidate::simple(i as u32 + 1, a, *c))
            .collect()
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_action("<action>Examine Desk 1</action>"), "examine desk 1");
        assert_eq!(normalize_action("look"), "look");
        assert_eq!(normalize_action("  go   to shelf 1 "), "go to shelf 1");
        assert_eq!(normalize_action(""), "");
        assert_eq!(normalize_action("<ACTION> Go\tTo  X </ACTION> trailing"), "go to x");
    }

    #[test]
    fn clustering() {
        let c = cands(&[("A", 0.1), ("A", 0.2), ("B", 0.3)]);
        let cl = cluster_actions(&c).unwrap();
        assert_eq!(cl["a"].len(), 2);
        assert_eq!(cl["b"].len(), 1);
        let d = cands(&[("x", 0.1), ("y", 0.1), ("z", 0.1)]);
        assert_eq!(cluster_actions(&d).unwrap().len(), 3);
        let l = cands(&[("Look", 0.1), ("look", 0.1)]);
        assert_eq!(cluster_actions(&l).unwrap()["look"].len(), 2);
        assert!(cluster_actions(&[]).is_err());
    }

    #[test]
    fn worked_scores() {
        let c = cands(&[("A", 0.9), ("A", 0.8), ("B", 0.7)]);
        let cl = cluster_actions(&c).unwrap();
        let s = consistency_score(&cl, 3).unwrap();
        // hand sums
        assert_abs_diff_eq!(s["a"], 1.7 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s["b"], 0.7 / 3.0, epsilon = 1e-12);
        assert!(consistency_score(&cl, 4).is_err());
        let out = select(&s, &c).unwrap();
        assert_eq!(out.chosen.canonical_action, "a");
        assert_eq!(out.chosen.sample_index, 1);

        let one = cands(&[("A", 0.6)]);
        assert_abs_diff_eq!(choose(&one).unwrap().score, 0.6, epsilon = 1e-12);
        let sym = cands(&[("A", 1.0), ("B", 1.0)]);
        let s = consistency_score(&cluster_actions(&sym).unwrap(), 2).unwrap();
        assert_eq!((s["a"], s["b"]), (0.5, 0.5));
    }

    #[test]
    fn tie_breaks() {
        // equal scores 0.6: A has two members, B one
        let c = cands(&[("B", 0.6), ("A", 0.3), ("A", 0.3), ("C", 0.0)]);
        assert_eq!(choose(&c).unwrap().chosen.canonical_action, "a");
        // equal score and size: higher mean is impossible, so lexicographic
        let c = cands(&[("b", 0.5), ("a", 0.5)]);
        assert_eq!(choose(&c).unwrap().chosen.canonical_action, "a");
        // representative: highest confidence, then lowest index
        let c = cands(&[("a", 0.4), ("a", 0.7), ("a", 0.7)]);
        assert_eq!(choose(&c).unwrap().chosen.sample_index, 2);
    }

    #[test]
    fn exploration_case() {
        let c = cands(&[("examine desk 1", 0.6), ("go to sidetable 1", 0.7), ("go to shelf 1", 0.85)]);
        let out = choose(&c).unwrap();
        assert_eq!(out.chosen.action, "go to shelf 1");
        assert_eq!(out.chosen.confidence.value(), 0.85);
    }

    fn arb_candidates() -> impl Strategy<Value = Vec<ReflectionCandidate>> {
        proptest::collection::vec((0usize..4, 0u32..=20), 1..7).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (a, c))| ReflectionCandidate::simple(i as u32 + 1, ["a", "b", "c", "d"][a], c as f64 / 20.0))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn sum_and_cluster_forms_agree(c in arb_candidates()) {
            let cl = cluster_actions(&c).unwrap();
            let n = c.len() as f64;
            let s = consistency_score(&cl, c.len()).unwrap();
            for (a, m) in &cl {
                let cluster_form = (m.len() as f64 / n) * mean_confidence(m);
                prop_assert!((s[a] - cluster_form).abs() <= 1e-12);
            }
            let total: f64 = s.values().sum();
            let direct = c.iter().map(|x| x.confidence.value()).sum::<f64>() / n;
            prop_assert!((total - direct).abs() <= 1e-12);
            prop_assert!(total <= 1.0 + 1e-12);
        }

        #[test]
        fn every_candidate_in_exactly_one_cluster(c in arb_candidates()) {
            let cl = cluster_actions(&c).unwrap();
            prop_assert_eq!(cl.values().map(Vec::len).sum::<usize>(), c.len());
        }

        #[test]
        fn argmax_is_scale_invariant(c in arb_candidates(), lambda in 1u32..=20) {
            let l = lambda as f64 / 20.0;
            let scaled: Vec<_> = c.iter().map(|x| {
                let mut y = x.clone();
                y.confidence = Confidence::new(x.confidence.value() * l).unwrap();
                y
            }).collect();
            let a = choose(&c).unwrap();
            let b = choose(&scaled).unwrap();
            prop_assert_eq!(a.chosen.canonical_action, b.chosen.canonical_action);
        }

        #[test]
        fn reported_score_is_recomputable(c in arb_candidates()) {
            let out = choose(&c).unwrap();
            let s: f64 = c.iter().filter(|x| x.canonical_action == out.chosen.canonical_action)
                .map(|x| x.confidence.value()).sum::<f64>() / c.len() as f64;
            prop_assert!((out.score - s).abs() <= 1e-12);
        }
    }
}
