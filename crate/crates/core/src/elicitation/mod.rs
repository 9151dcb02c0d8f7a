//! Prompt construction for the action, reflection and memory-expansion
//! calls, and parsing of tagged completions back into structured steps.

mod parse;
pub mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;
use crate::error::ContractViolation;
use crate::memory::MemoryEntry;

pub use parse::{
    parse_tagged_response, render_tagged, ParseFailure, ParseWarning, ParsedStep, TagField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Action,
    Reflection,
    Expansion,
}

/// What the model is asked to report alongside its action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Plain ReAct: think and act, nothing else.
    Baseline,
    /// Confidence is required, an explanation is optional.
    ConfidenceOnly,
    ConfidencePlusExplanation,
}

impl Protocol {
    pub fn requires_confidence(self) -> bool {
        !matches!(self, Protocol::Baseline)
    }

    pub fn requires_explanation(self) -> bool {
        matches!(self, Protocol::ConfidencePlusExplanation)
    }
}

/// How past steps are written into the `{action_history}` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryFormat {
    /// Observation and action only.
    Plain,
    /// Variant A: adds the `<confidence>` line.
    ConfidenceOnly,
    /// Variant B: adds `<confidence>` and `<explanation>` lines.
    ConfidencePlusExplanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
    pub protocol: Protocol,
}

/// Everything the action template needs besides the history view.
#[derive(Debug, Clone, Copy)]
pub struct ActionSlots<'a> {
    pub task: &'a str,
    /// Number of steps already taken (the full memory length).
    pub step_count: usize,
    pub observation: &'a str,
    pub admissible_actions: &'a [String],
}

pub fn render_history(window: &[MemoryEntry], format: HistoryFormat) -> String {
    let mut out = String::new();
    for e in window {
        out.push_str(&format!(
            "\nStep {}:\nObservation: {}\nAction: <action>{}</action>",
            e.step_index, e.observation, e.action
        ));
        match format {
            HistoryFormat::Plain => {}
            HistoryFormat::ConfidenceOnly => {
                out.push_str(&format!("\n<confidence>{}</confidence>", e.confidence));
            }
            HistoryFormat::ConfidencePlusExplanation => {
                out.push_str(&format!(
                    "\n<confidence>{}</confidence>\n<explanation>{}</explanation>",
                    e.confidence, e.explanation
                ));
            }
        }
    }
    out
}

pub fn build_action_prompt(
    slots: ActionSlots<'_>,
    window: &[MemoryEntry],
    protocol: Protocol,
    history: HistoryFormat,
) -> Result<PromptText, ContractViolation> {
    if slots.observation.trim().is_empty() {
        return Err(ContractViolation::new(
            "build_action_prompt",
            "observation must be non-empty",
        ));
    }
    let mut values = BTreeMap::new();
    values.insert("task_description", slots.task.to_string());
    values.insert("step_count", slots.step_count.to_string());
    values.insert("history_length", window.len().to_string());
    values.insert("action_history", render_history(window, history));
    values.insert("current_step", slots.step_count.to_string());
    values.insert("current_observation", slots.observation.to_string());
    values.insert("admissible_actions", slots.admissible_actions.join(", "));
    let mut text = template::render(template::ACTION, &values);
    if protocol != Protocol::Baseline {
        text.push_str("\n\n");
        text.push_str(template::ELICITATION_SUFFIX.trim_end_matches('\n'));
    }
    Ok(PromptText {
        text,
        kind: PromptKind::Action,
        protocol,
    })
}

/// Feed the model's own explanation back as the cue for a new attempt.
pub fn build_reflection_prompt(
    full_context: &str,
    previous_response: &str,
    confidence: Confidence,
    explanation: &str,
) -> Result<PromptText, ContractViolation> {
    if explanation.trim().is_empty() {
        return Err(ContractViolation::new(
            "build_reflection_prompt",
            "reflection needs a non-empty explanation to act on",
        ));
    }
    let mut values = BTreeMap::new();
    values.insert("confidence", confidence.to_string());
    values.insert("explanation", explanation.to_string());
    values.insert("full_context", full_context.to_string());
    values.insert("previous_response", previous_response.to_string());
    Ok(PromptText {
        text: template::render(template::REFLECTION, &values),
        kind: PromptKind::Reflection,
        protocol: Protocol::ConfidencePlusExplanation,
    })
}

/// Inputs for [`build_expansion_prompt`].
#[derive(Debug, Clone, Copy)]
pub struct ExpansionSlots<'a> {
    pub action: ActionSlots<'a>,
    pub full_memory: &'a [MemoryEntry],
    pub limited_window: usize,
    pub history: HistoryFormat,
    pub previous_response: &'a str,
    pub confidence: Confidence,
    pub explanation: &'a str,
}

/// Re-render the context over the full memory and append the expansion
/// instructions.
pub fn build_expansion_prompt(slots: ExpansionSlots<'_>) -> Result<PromptText, ContractViolation> {
    if slots.full_memory.len() < slots.limited_window {
        return Err(ContractViolation::new(
            "build_expansion_prompt",
            format!(
                "full memory ({} steps) is shorter than the limited window ({})",
                slots.full_memory.len(),
                slots.limited_window
            ),
        ));
    }
    let context = build_action_prompt(
        slots.action,
        slots.full_memory,
        Protocol::ConfidencePlusExplanation,
        slots.history,
    )?;
    let mut values = BTreeMap::new();
    values.insert("full_context", context.text);
    values.insert("previous_response", slots.previous_response.to_string());
    values.insert("confidence", slots.confidence.to_string());
    values.insert("explanation", slots.explanation.to_string());
    values.insert("history_length", slots.full_memory.len().to_string());
    Ok(PromptText {
        text: template::render(template::EXPANSION, &values),
        kind: PromptKind::Expansion,
        protocol: Protocol::ConfidencePlusExplanation,
    })
}
