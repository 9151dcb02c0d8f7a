//! System 2: Best-of-N reflective resampling, per-path refinement,
//! consistency-weighted selection and one-shot memory expansion.

mod select;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::Confidence;
use crate::elicitation::{
    build_action_prompt, build_expansion_prompt, build_reflection_prompt, parse_tagged_response, ActionSlots,
    ExpansionSlots, HistoryFormat, ParsedStep, PromptText, Protocol,
};
use crate::error::ContractViolation;
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::memory::{MemoryWindow, UncertaintyAwareMemory};

pub use select::{
    choose, cluster_actions, consistency_score, normalize_action, select, ActionEquivalence, Clusters,
    NormalizedMatch, ReflectionCandidate, SelectionOutcome, SCORE_TIE_EPSILON,
};

/// A reflection sample that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedSample {
    pub sample_index: u32,
    pub iteration: u32,
    pub used_expanded_memory: bool,
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum ReflectError {
    #[error("every reflection path was unparseable")]
    Exhausted { discarded: Vec<DiscardedSample> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Contract(#[from] ContractViolation),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionParams {
    pub tau: Confidence,
    pub n_samples: usize,
    /// Total prompt rounds per path, the first sample included.
    pub depth: usize,
    pub expansion_enabled: bool,
    pub temperature: f64,
    pub max_output: usize,
}

/// Everything System 2 may look at for one step.
pub struct ReflectionInputs<'a> {
    pub slots: ActionSlots<'a>,
    pub memory: &'a UncertaintyAwareMemory,
    pub window: MemoryWindow,
    pub history: HistoryFormat,
    /// The System 1 proposal being reconsidered.
    pub initial: &'a ParsedStep,
    pub seed: u64,
    pub equivalence: &'a dyn ActionEquivalence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    pub outcome: SelectionOutcome,
    /// The limited-window outcome when expansion replaced it.
    pub first_pass: Option<SelectionOutcome>,
    pub expanded: bool,
    pub discarded: Vec<DiscardedSample>,
}

struct Pass {
    candidates: Vec<ReflectionCandidate>,
    discarded: Vec<DiscardedSample>,
}

fn to_candidate(
    p: &ParsedStep,
    k: u32,
    iteration: u32,
    expanded: bool,
    eq: &dyn ActionEquivalence,
) -> ReflectionCandidate {
    ReflectionCandidate {
        sample_index: k,
        iteration,
        action: p.action.clone(),
        canonical_action: eq.canonical(&p.action),
        confidence: p.confidence_or_zero(),
        explanation: p.explanation_or_empty().to_string(),
        used_expanded_memory: expanded,
        raw: p.raw.clone(),
    }
}

/// Sample N paths from `first_prompt`, refine each against its own
/// explanation while below tau, and return the surviving final candidates.
fn run_pass(
    gateway: &dyn Gateway,
    first_prompt: PromptText,
    context: &str,
    params: &ReflectionParams,
    inputs: &ReflectionInputs<'_>,
    expanded: bool,
) -> Result<Pass, ReflectError> {
    let mut base = CompletionRequest::new(first_prompt, params.temperature, inputs.seed);
    base.max_output = params.max_output;
    let samples = gateway.sample_n(&base, params.n_samples)?;
    let parse = |raw: &str| parse_tagged_response(raw, Protocol::ConfidencePlusExplanation);

    let paths: Vec<Result<(Option<ReflectionCandidate>, Vec<DiscardedSample>), ReflectError>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, raw)| {
            let k = i as u32 + 1;
            let mut discarded = Vec::new();
            let discard = |iteration: u32, raw: &str, reason: String| DiscardedSample {
                sample_index: k,
                iteration,
                used_expanded_memory: expanded,
                raw: raw.to_string(),
                reason,
            };
            let mut current = match parse(raw) {
                Ok(p) => to_candidate(&p, k, 1, expanded, inputs.equivalence),
                Err(e) => return Ok((None, vec![discard(1, raw, e.to_string())])),
            };
            let mut iteration = 1u32;
            while current.confidence < params.tau && (iteration as usize) < params.depth {
                iteration += 1;
                let prompt = build_reflection_prompt(context, &current.raw, current.confidence, &current.explanation)?;
                let mut req = CompletionRequest::new(prompt, params.temperature, inputs.seed);
                req.sample_index = k;
                req.max_output = params.max_output;
                let raw = gateway.complete(&req)?;
                match parse(&raw) {
                    Ok(p) => current = to_candidate(&p, k, iteration, expanded, inputs.equivalence),
                    Err(e) => {
                        // keep the last good answer for this path
                        discarded.push(discard(iteration, &raw, e.to_string()));
                        break;
                    }
                }
            }
            Ok((Some(current), discarded))
        })
        .collect();

    let mut pass = Pass {
        candidates: Vec::new(),
        discarded: Vec::new(),
    };
    for p in paths {
        let (c, d) = p?;
        pass.candidates.extend(c);
        pass.discarded.extend(d);
    }
    Ok(pass)
}

/// Run System 2 for one step.
pub fn reflect(
    gateway: &dyn Gateway,
    inputs: &ReflectionInputs<'_>,
    params: &ReflectionParams,
) -> Result<ReflectionReport, ReflectError> {
    let explanation = inputs.initial.explanation_or_empty();
    if params.n_samples == 0 || params.depth == 0 {
        return Err(ContractViolation::new("reflect", "N and D must be >= 1").into());
    }
    let window = inputs.memory.window(inputs.window);
    let context = build_action_prompt(inputs.slots, window, Protocol::ConfidencePlusExplanation, inputs.history)?;
    let first_prompt = build_reflection_prompt(
        &context.text,
        &inputs.initial.raw,
        inputs.initial.confidence_or_zero(),
        explanation,
    )?;
    let pass = run_pass(gateway, first_prompt, &context.text, params, inputs, false)?;
    let mut discarded = pass.discarded;
    if pass.candidates.is_empty() {
        return Err(ReflectError::Exhausted { discarded });
    }
    let outcome = choose(&pass.candidates)?;

    let limited = inputs
        .window
        .limit()
        .is_some_and(|h| inputs.memory.len() > h);
    if !(params.expansion_enabled && limited && outcome.score < params.tau.value()) {
        return Ok(ReflectionReport {
            outcome,
            first_pass: None,
            expanded: false,
            discarded,
        });
    }

    let full = inputs.memory.entries();
    let full_context = build_action_prompt(inputs.slots, full, Protocol::ConfidencePlusExplanation, inputs.history)?;
    let expansion_prompt = build_expansion_prompt(ExpansionSlots {
        action: inputs.slots,
        full_memory: full,
        limited_window: window.len(),
        history: inputs.history,
        previous_response: &outcome.chosen.raw,
        confidence: outcome.chosen.confidence,
        explanation: &outcome.chosen.explanation,
    })?;
    let second = run_pass(gateway, expansion_prompt, &full_context.text, params, inputs, true)?;
    discarded.extend(second.discarded);
    // exactly one expansion; its outcome stands whatever its score
    let final_outcome = if second.candidates.is_empty() {
        outcome.clone()
    } else {
        choose(&second.candidates)?
    };
    let first_pass = Some(outcome);
    Ok(ReflectionReport {
        outcome: final_outcome,
        first_pass,
        expanded: true,
        discarded,
    })
}
