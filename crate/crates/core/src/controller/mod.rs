//! The per-step dual-process decision and the episode loop.

mod config;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::confidence::Confidence;
use crate::elicitation::{build_action_prompt, parse_tagged_response, ActionSlots, ParsedStep, PromptText, Protocol};
use crate::error::ContractViolation;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Metered, GREEDY_TEMPERATURE};
use crate::memory::{MemoryEntry, UncertaintyAwareMemory};
use crate::reflection::{
    reflect, ActionEquivalence, DiscardedSample, NormalizedMatch, ReflectError, ReflectionCandidate, ReflectionInputs,
    ReflectionParams,
};
use crate::seed::derive_seed;
use crate::trajectory::{CostLedger, EnvOutcome, StepAudit, TerminationReason, TrajectoryRecord};
use crate::worldsim::{Environment, Observation};

pub use config::{switch, PolicyConfig, PolicyMode};

pub const PARSE_FAILURE_EXPLANATION: &str = "PARSE_FAILURE";

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Contract(#[from] ContractViolation),
}

/// The result of one decision, before the environment is stepped.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalizedStep {
    /// `None` when no usable action could be recovered at all.
    pub action: Option<String>,
    pub confidence: Confidence,
    pub explanation: String,
    pub triggered_system2: bool,
    pub reflected: bool,
    pub expanded: bool,
    pub audit: StepAudit,
}

impl FinalizedStep {
    pub fn candidates_logged(&self) -> &[ReflectionCandidate] {
        &self.audit.candidates
    }
}

fn hex_sha256(text: &str) -> String {
    let d = Sha256::digest(text.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn format_reminder(protocol: Protocol) -> String {
    let mut s = String::from(
        "\n\nYour previous reply could not be read. Answer again and put the chosen action inside <action>...</action> tags",
    );
    if protocol.requires_confidence() {
        s.push_str(", your confidence (0.0-1.0) inside <confidence>...</confidence> tags");
    }
    if protocol.requires_explanation() {
        s.push_str(", and a non-empty explanation inside <explanation>...</explanation> tags");
    }
    s.push('.');
    s
}

/// Pick the majority canonical action; ties go to the higher mean
/// confidence, then the lexicographically smaller action.
fn majority_vote(votes: &[ReflectionCandidate]) -> Option<(ReflectionCandidate, f64)> {
    let clusters = crate::reflection::cluster_actions(votes).ok()?;
    let mut best: Option<(&String, usize, f64)> = None;
    for (a, m) in &clusters {
        let mean = m.iter().map(|c| c.confidence.value()).sum::<f64>() / m.len() as f64;
        let better = match best {
            None => true,
            Some((_, n, bm)) => m.len() > n || (m.len() == n && mean > bm + crate::reflection::SCORE_TIE_EPSILON),
        };
        if better {
            best = Some((a, m.len(), mean));
        }
    }
    let (a, _, mean) = best?;
    let rep = clusters[a]
        .iter()
        .copied()
        .max_by(|x, y| {
            x.confidence
                .value()
                .total_cmp(&y.confidence.value())
                .then(y.sample_index.cmp(&x.sample_index))
        })?
        .clone();
    Some((rep, mean))
}

/// Everything `decide_step` needs about the current step.
pub struct StepContext<'a> {
    pub memory: &'a UncertaintyAwareMemory,
    pub observation: &'a Observation,
    pub config: &'a PolicyConfig,
    pub seed: u64,
    pub equivalence: &'a dyn ActionEquivalence,
}

/// Phase 1 (System 1), then Phase 2 (System 2) when the mode allows and
/// the proposal falls below tau.
pub fn decide_step(gateway: &dyn Gateway, cx: &StepContext<'_>) -> Result<FinalizedStep, ControllerError> {
    let config = cx.config;
    let mode = config.mode;
    let protocol = mode.protocol();
    let history = mode.history();
    let slots = ActionSlots {
        task: &cx.memory.task,
        step_count: cx.memory.len(),
        observation: &cx.observation.text,
        admissible_actions: &cx.observation.admissible,
    };
    let window = cx.memory.window(config.memory_window);
    let prompt = build_action_prompt(slots, window, protocol, history)?;
    let step_index = cx.memory.len();

    let mut audit = StepAudit {
        step_index,
        observation: cx.observation.text.clone(),
        observation_corrupted: cx.observation.corrupted,
        prompt_hash: hex_sha256(&prompt.text),
        raw_completion: String::new(),
        reprompted: false,
        parse_failure: None,
        warnings: Vec::new(),
        initial_action: String::new(),
        initial_confidence: Confidence::ZERO,
        initial_explanation: String::new(),
        triggered: false,
        candidates: Vec::new(),
        votes: Vec::new(),
        discarded: Vec::new(),
        selection_score: None,
        first_pass_score: None,
        expanded: false,
        reflection_exhausted: false,
        result: None,
    };

    let greedy = |p: PromptText| {
        let mut r = CompletionRequest::new(p, GREEDY_TEMPERATURE, cx.seed);
        r.max_output = config.max_output;
        r
    };

    // Phase 1
    let initial: Option<ParsedStep> = if mode == PolicyMode::CotSc {
        let mut req = greedy(prompt.clone());
        req.temperature = config.sample_temperature;
        let samples = gateway.sample_n(&req, config.sc_votes)?;
        audit.raw_completion = samples.first().cloned().unwrap_or_default();
        for (i, raw) in samples.iter().enumerate() {
            let k = i as u32 + 1;
            match parse_tagged_response(raw, protocol) {
                Ok(p) => audit.votes.push(ReflectionCandidate {
                    sample_index: k,
                    iteration: 1,
                    action: p.action.clone(),
                    canonical_action: cx.equivalence.canonical(&p.action),
                    confidence: p.confidence_or_zero(),
                    explanation: p.explanation_or_empty().to_string(),
                    used_expanded_memory: false,
                    raw: raw.clone(),
                }),
                Err(e) => audit.discarded.push(DiscardedSample {
                    sample_index: k,
                    iteration: 1,
                    used_expanded_memory: false,
                    raw: raw.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        match majority_vote(&audit.votes) {
            Some((rep, mean)) => {
                audit.selection_score = Some(mean);
                let c = Confidence::new(mean).unwrap_or(rep.confidence);
                Some(ParsedStep {
                    think: None,
                    action: rep.action.clone(),
                    confidence: Some(c),
                    explanation: (!rep.explanation.is_empty()).then(|| rep.explanation.clone()),
                    raw: rep.raw.clone(),
                    warnings: Vec::new(),
                })
            }
            None => {
                audit.parse_failure = Some("no parseable vote".into());
                None
            }
        }
    } else {
        let raw = gateway.complete(&greedy(prompt.clone()))?;
        audit.raw_completion = raw.clone();
        match parse_tagged_response(&raw, protocol) {
            Ok(p) => Some(p),
            Err(first) => {
                audit.reprompted = true;
                let mut retry = prompt.clone();
                retry.text.push_str(&format_reminder(protocol));
                let raw2 = gateway.complete(&greedy(retry))?;
                audit.raw_completion = raw2.clone();
                match parse_tagged_response(&raw2, protocol) {
                    Ok(p) => Some(p),
                    Err(second) => {
                        log::warn!("step {step_index}: unparseable after re-prompt ({first}; {second})");
                        audit.parse_failure = Some(second.to_string());
                        None
                    }
                }
            }
        }
    };

    let initial = match initial {
        Some(p) => p,
        None => {
            // salvage an action tag if one exists, with zero confidence
            let salvaged = parse_tagged_response(&audit.raw_completion, Protocol::Baseline)
                .ok()
                .map(|p| p.action);
            ParsedStep {
                think: None,
                action: salvaged.unwrap_or_default(),
                confidence: Some(Confidence::ZERO),
                explanation: Some(PARSE_FAILURE_EXPLANATION.to_string()),
                raw: audit.raw_completion.clone(),
                warnings: Vec::new(),
            }
        }
    };
    audit.warnings = initial.warnings.clone();
    audit.initial_action = initial.action.clone();
    audit.initial_confidence = initial.confidence_or_zero();
    audit.initial_explanation = initial.explanation_or_empty().to_string();

    let mut step = FinalizedStep {
        action: (!initial.action.trim().is_empty()).then(|| initial.action.clone()),
        confidence: initial.confidence_or_zero(),
        explanation: initial.explanation_or_empty().to_string(),
        triggered_system2: false,
        reflected: false,
        expanded: false,
        audit,
    };

    // Phase 2
    if mode.uses_system2() && switch(step.confidence, config.tau) {
        step.triggered_system2 = true;
        step.audit.triggered = true;
        let inputs = ReflectionInputs {
            slots,
            memory: cx.memory,
            window: config.memory_window,
            history,
            initial: &initial,
            seed: cx.seed,
            equivalence: cx.equivalence,
        };
        let params = ReflectionParams {
            tau: config.tau,
            n_samples: config.n_samples,
            depth: config.reflection_depth,
            expansion_enabled: config.expansion_enabled,
            temperature: config.sample_temperature,
            max_output: config.max_output,
        };
        match reflect(gateway, &inputs, &params) {
            Ok(report) => {
                let chosen = &report.outcome.chosen;
                step.action = Some(chosen.action.clone());
                step.confidence = chosen.confidence;
                step.explanation = chosen.explanation.clone();
                step.reflected = true;
                step.expanded = report.expanded;
                step.audit.expanded = report.expanded;
                step.audit.selection_score = Some(report.outcome.score);
                step.audit.first_pass_score = report.first_pass.as_ref().map(|o| o.score);
                // limited-window candidates first, then any expanded-pass ones
                match &report.first_pass {
                    Some(fp) => {
                        step.audit.candidates = fp.all_candidates.clone();
                        if fp != &report.outcome {
                            step.audit.candidates.extend(report.outcome.all_candidates.iter().cloned());
                        }
                    }
                    None => step.audit.candidates = report.outcome.all_candidates.clone(),
                }
                step.audit.discarded.extend(report.discarded);
            }
            Err(ReflectError::Exhausted { discarded }) => {
                log::warn!("step {step_index}: reflection exhausted, keeping the System 1 proposal");
                step.audit.reflection_exhausted = true;
                step.audit.discarded.extend(discarded);
            }
            Err(ReflectError::Gateway(e)) => return Err(e.into()),
            Err(ReflectError::Contract(e)) => return Err(e.into()),
        }
    }
    Ok(step)
}

/// Run one episode to goal, step cap or environment fault.
pub fn run_episode(
    env: &mut dyn Environment,
    config: &PolicyConfig,
    gateway: &dyn Gateway,
    episode_seed: u64,
    episode_id: &str,
) -> Result<TrajectoryRecord, ControllerError> {
    config.validate()?;
    let metered = Metered::new(gateway);
    let equivalence = NormalizedMatch;
    let mut observation = env.reset(episode_seed);
    let mut memory = UncertaintyAwareMemory::new(env.task());
    let mut audit_log = Vec::new();
    let mut extra = CostLedger::default();
    let cap = config.t_max.min(env.max_steps());
    let mut reason = TerminationReason::StepLimit;
    let mut success = false;

    for t in 0..cap {
        let cx = StepContext {
            memory: &memory,
            observation: &observation,
            config,
            seed: derive_seed(episode_seed, "step", t as u64),
            equivalence: &equivalence,
        };
        let mut step = decide_step(&metered, &cx)?;
        extra.system2_triggers += u64::from(step.triggered_system2);
        extra.expansions += u64::from(step.expanded);
        let Some(action) = step.action.clone() else {
            audit_log.push(step.audit);
            reason = TerminationReason::EnvironmentError;
            break;
        };
        extra.env_steps += 1;
        let result = env.step(&action);
        let mut entry = MemoryEntry::new(t, observation.text.clone(), action, step.confidence, step.explanation.clone());
        entry.reflected = step.reflected;
        entry.expanded = step.expanded;
        memory.append(entry)?;
        match result {
            Ok(r) => {
                step.audit.result = Some(EnvOutcome {
                    observation: r.observation.text.clone(),
                    done: r.done,
                    success: r.success,
                    corrupted: r.observation.corrupted,
                });
                audit_log.push(step.audit);
                if r.done {
                    success = r.success;
                    reason = if r.success {
                        TerminationReason::Goal
                    } else {
                        TerminationReason::EnvironmentError
                    };
                    break;
                }
                observation = r.observation;
            }
            Err(e) => {
                log::warn!("episode {episode_id}: environment fault at step {t}: {e}");
                audit_log.push(step.audit);
                reason = TerminationReason::EnvironmentError;
                break;
            }
        }
    }

    let mut cost = metered.ledger();
    cost.env_steps = extra.env_steps;
    cost.system2_triggers = extra.system2_triggers;
    cost.expansions = extra.expansions;
    Ok(TrajectoryRecord {
        episode_id: episode_id.to_string(),
        scenario_id: env.scenario_id().to_string(),
        seed: episode_seed,
        mode: config.mode,
        tau: config.tau,
        entries: memory.into_entries(),
        audit: audit_log,
        success,
        terminated_reason: reason,
        cost,
    })
}
