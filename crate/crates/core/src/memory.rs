//! Uncertainty-aware memory: the verbatim per-step log of observation,
//! action, verbalized confidence and explanation that System 1 conditions on.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;
use crate::error::ContractViolation;

/// One finalized time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub step_index: usize,
    pub observation: String,
    pub action: String,
    pub confidence: Confidence,
    pub explanation: String,
    /// System 2 replaced the System 1 proposal at this step.
    pub reflected: bool,
    /// Reflection escalated to the full history at this step.
    pub expanded: bool,
}

impl MemoryEntry {
    pub fn new(
        step_index: usize,
        observation: impl Into<String>,
        action: impl Into<String>,
        confidence: Confidence,
        explanation: impl Into<String>,
    ) -> Self {
        Self {
            step_index,
            observation: observation.into(),
            action: action.into(),
            confidence,
            explanation: explanation.into(),
            reflected: false,
            expanded: false,
        }
    }
}

/// How much of the memory a prompt gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MemoryWindow {
    /// The most recent `h` entries.
    Last(NonZeroUsize),
    #[default]
    Full,
}

impl MemoryWindow {
    pub fn last(h: usize) -> Result<Self, ContractViolation> {
        NonZeroUsize::new(h)
            .map(MemoryWindow::Last)
            .ok_or_else(|| ContractViolation::new("memory_window", "window size must be >= 1"))
    }

    pub fn limit(self) -> Option<usize> {
        match self {
            MemoryWindow::Last(h) => Some(h.get()),
            MemoryWindow::Full => None,
        }
    }
}

impl fmt::Display for MemoryWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryWindow::Last(h) => write!(f, "{h}"),
            MemoryWindow::Full => f.write_str("full"),
        }
    }
}

impl FromStr for MemoryWindow {
    type Err = ContractViolation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(MemoryWindow::Full);
        }
        let h: usize = s.parse().map_err(|_| {
            ContractViolation::new("memory_window", format!("expected `full` or a count, got {s:?}"))
        })?;
        MemoryWindow::last(h)
    }
}

// Serialized as the integer `h` or the string "full".
impl Serialize for MemoryWindow {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MemoryWindow::Last(h) => serializer.serialize_u64(h.get() as u64),
            MemoryWindow::Full => serializer.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for MemoryWindow {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(h) => MemoryWindow::last(h as usize).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The task instruction plus the append-only sequence of finalized steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyAwareMemory {
    pub task: String,
    entries: Vec<MemoryEntry>,
}

impl UncertaintyAwareMemory {
    pub fn new(task: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            entries: Vec::new(),
        }
    }

    /// Append at the tail. The entry must carry the next step index.
    pub fn append(&mut self, entry: MemoryEntry) -> Result<(), ContractViolation> {
        if entry.step_index != self.entries.len() {
            return Err(ContractViolation::new(
                "memory_append",
                format!(
                    "entry step_index {} does not follow memory length {}",
                    entry.step_index,
                    self.entries.len()
                ),
            ));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn window(&self, window: MemoryWindow) -> &[MemoryEntry] {
        match window {
            MemoryWindow::Full => &self.entries,
            MemoryWindow::Last(h) => {
                let start = self.entries.len().saturating_sub(h.get());
                &self.entries[start..]
            }
        }
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<MemoryEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
