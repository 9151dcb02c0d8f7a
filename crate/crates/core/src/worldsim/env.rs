use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::Scenario;
use super::state::{narrate, room_overview, describe_location, EnvState};
use super::{Environment, Observation, StepResult, WorldError};
use crate::error::ContractViolation;

pub const NOTHING_HAPPENS: &str = "Nothing happens.";

/// Lowercase, collapse internal whitespace, trim.
pub fn normalize_command(action: &str) -> String {
    action.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// One live episode over a [`Scenario`].
#[derive(Debug, Clone)]
pub struct TextWorld {
    scenario: Scenario,
    state: EnvState,
    rng: ChaCha8Rng,
    done: bool,
    decoys: Vec<String>,
}

impl TextWorld {
    pub fn new(scenario: Scenario) -> Self {
        let state = EnvState::initial(&scenario);
        let decoys = scenario.decoys();
        Self {
            scenario,
            state,
            rng: ChaCha8Rng::seed_from_u64(0),
            done: false,
            decoys,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    fn admissible(&self) -> Vec<String> {
        self.state.admissible(&self.scenario).into_iter().map(|(c, _)| c).collect()
    }

    /// One uniform draw per observation decides corruption, so the stream
    /// position never depends on the text itself.
    fn maybe_corrupt(&mut self, text: String) -> (String, bool) {
        let u: f64 = self.rng.gen();
        if u >= self.scenario.noise_rate || self.scenario.noise_rate == 0.0 {
            return (text, false);
        }
        let mentions = self.mentions(&text);
        if mentions.is_empty() {
            let decoy = &self.decoys[self.rng.gen_range(0..self.decoys.len())];
            return (format!("{text} You notice a {decoy}."), true);
        }
        let (start, len) = mentions[self.rng.gen_range(0..mentions.len())];
        let original = &text[start..start + len];
        let pool: Vec<&String> = self.decoys.iter().filter(|d| d.as_str() != original).collect();
        let decoy = if pool.is_empty() {
            "object 99".to_string()
        } else {
            pool[self.rng.gen_range(0..pool.len())].clone()
        };
        let mut out = String::with_capacity(text.len() + decoy.len());
        out.push_str(&text[..start]);
        out.push_str(&decoy);
        out.push_str(&text[start + len..]);
        (out, true)
    }

    /// Byte spans of whole-word object-name mentions, sorted by position.
    fn mentions(&self, text: &str) -> Vec<(usize, usize)> {
        let bytes = text.as_bytes();
        let mut spans = Vec::new();
        for o in &self.scenario.objects {
            let name = o.name.as_str();
            let mut from = 0;
            while let Some(i) = text[from..].find(name) {
                let start = from + i;
                let end = start + name.len();
                let left_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
                let right_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
                if left_ok && right_ok {
                    spans.push((start, name.len()));
                }
                from = end;
            }
        }
        spans.sort();
        spans.dedup_by_key(|s| s.0);
        spans
    }

    fn initial_text(&self) -> String {
        match self.state.location {
            None => room_overview(&self.scenario),
            Some(l) => format!(
                "You are at {}. {}",
                self.scenario.locations[l].name,
                describe_location(&self.scenario, &self.state, l)
            ),
        }
    }
}

impl Environment for TextWorld {
    fn task(&self) -> &str {
        &self.scenario.task
    }

    fn scenario_id(&self) -> &str {
        &self.scenario.id
    }

    fn max_steps(&self) -> usize {
        self.scenario.max_steps
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.state = EnvState::initial(&self.scenario);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.done = false;
        let (text, corrupted) = self.maybe_corrupt(self.initial_text());
        Observation {
            text,
            admissible: self.admissible(),
            corrupted,
        }
    }

    fn step(&mut self, action: &str) -> Result<StepResult, WorldError> {
        if self.done {
            return Err(ContractViolation::new("env_step", "episode already finished").into());
        }
        let wanted = normalize_command(action);
        let effect = self
            .state
            .admissible(&self.scenario)
            .into_iter()
            .find(|(c, _)| *c == wanted)
            .map(|(_, e)| e);
        let text = match effect {
            Some(e) => {
                self.state.apply(&self.scenario, e);
                narrate(&self.scenario, &self.state, e)
            }
            None => NOTHING_HAPPENS.to_string(),
        };
        let success = self.state.is_goal(&self.scenario);
        self.done = success;
        let (text, corrupted) = self.maybe_corrupt(text);
        Ok(StepResult {
            observation: Observation {
                text,
                admissible: self.admissible(),
                corrupted,
            },
            done: success,
            success,
        })
    }
}
