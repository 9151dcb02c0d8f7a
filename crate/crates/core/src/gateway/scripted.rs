use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::view::PromptView;
use super::{CompletionRequest, Gateway, GatewayError};
use crate::confidence::Confidence;
use crate::elicitation::{render_tagged, PromptKind};
use crate::worldsim::{solve_from, EnvState, GoalStep, Scenario};

/// One canned completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSpec {
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub explanation: Option<String>,
    #[serde(default)]
    pub think: Option<String>,
    /// Literal completion text, bypassing the tagged renderer.
    #[serde(default)]
    pub raw: Option<String>,
}

/// Placeholder in a response action that echoes the action of the
/// previous response (reflection and expansion prompts only).
pub const PREVIOUS_ACTION: &str = "{previous_action}";

impl ResponseSpec {
    fn render(&self, previous_action: Option<&str>) -> Result<String, GatewayError> {
        if let Some(raw) = &self.raw {
            return Ok(raw.clone());
        }
        let action = self
            .action
            .as_deref()
            .ok_or_else(|| GatewayError::Spec("response without `action` or `raw`".into()))?;
        let echoed;
        let action = if action.contains(PREVIOUS_ACTION) {
            let prev = previous_action
                .ok_or_else(|| GatewayError::Spec(format!("{PREVIOUS_ACTION} used outside a reflection prompt")))?;
            echoed = action.replace(PREVIOUS_ACTION, prev);
            echoed.as_str()
        } else {
            action
        };
        let confidence = self
            .confidence
            .map(|c| Confidence::new(c).map_err(|e| GatewayError::Spec(e.to_string())))
            .transpose()?;
        Ok(render_tagged(self.think.as_deref(), action, confidence, self.explanation.as_deref()))
    }
}

/// Conjunction of optional conditions over a [`PromptView`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub kind: Option<PromptKind>,
    #[serde(default)]
    pub task_contains: Option<String>,
    #[serde(default)]
    pub observation_contains: Vec<String>,
    #[serde(default)]
    pub observation_lacks: Vec<String>,
    #[serde(default)]
    pub history_contains: Vec<String>,
    #[serde(default)]
    pub history_lacks: Vec<String>,
    #[serde(default)]
    pub prompt_contains: Vec<String>,
    #[serde(default)]
    pub previous_action: Option<String>,
    #[serde(default)]
    pub step: Option<usize>,
    pub response: Option<ResponseSpec>,
    /// Sample `k` (1-based) answers with `variants[(k - 1) % len]`.
    #[serde(default)]
    pub variants: Vec<ResponseSpec>,
}

impl Rule {
    fn matches(&self, kind: PromptKind, text: &str, v: &PromptView<'_>) -> bool {
        self.kind.is_none_or(|k| k == kind)
            && self.task_contains.as_deref().is_none_or(|t| v.task.contains(t))
            && self.observation_contains.iter().all(|s| v.observation.contains(s.as_str()))
            && self.observation_lacks.iter().all(|s| !v.observation.contains(s.as_str()))
            && self.history_contains.iter().all(|s| v.history.contains(s.as_str()))
            && self.history_lacks.iter().all(|s| !v.history.contains(s.as_str()))
            && self.prompt_contains.iter().all(|s| text.contains(s.as_str()))
            && self
                .previous_action
                .as_deref()
                .is_none_or(|p| v.previous_action.as_deref() == Some(p))
            && self.step.is_none_or(|s| v.step == Some(s))
    }

    fn pick(&self, sample_index: u32) -> Result<&ResponseSpec, GatewayError> {
        if !self.variants.is_empty() {
            let k = (sample_index.max(1) as usize - 1) % self.variants.len();
            return Ok(&self.variants[k]);
        }
        self.response
            .as_ref()
            .ok_or_else(|| GatewayError::Spec(format!("rule {:?} has no response", self.name)))
    }
}

/// Omniscient fallback agent: plans a shortest path from the state it can
/// infer from the prompt and errs, seeded, on its low-confidence steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    /// Confidence emitted per leading verb of the correct next action.
    #[serde(default)]
    pub calibration: BTreeMap<String, f64>,
    #[serde(default = "PlannerSpec::default_confidence")]
    pub default_confidence: f64,
    /// Errors are only injected on steps whose confidence is below this.
    #[serde(default = "PlannerSpec::default_threshold")]
    pub error_threshold: f64,
    /// Probability of a wrong action on an eligible System 1 step.
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default = "PlannerSpec::default_reflection_confidence")]
    pub reflection_confidence: f64,
    /// Probability that one reflection sample is wrong.
    #[serde(default)]
    pub reflection_noise_rate: f64,
    #[serde(default = "PlannerSpec::default_wrong_confidence")]
    pub reflection_wrong_confidence: f64,
}

impl PlannerSpec {
    fn default_confidence() -> f64 {
        0.9
    }
    fn default_threshold() -> f64 {
        0.85
    }
    fn default_reflection_confidence() -> f64 {
        0.9
    }
    fn default_wrong_confidence() -> f64 {
        0.4
    }

    fn confidence_for(&self, action: &str) -> f64 {
        let verb = action.split_whitespace().next().unwrap_or("");
        self.calibration.get(verb).copied().unwrap_or(self.default_confidence)
    }
}

/// Scripted model document (TOML on disk).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedModelSpec {
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub planner: Option<PlannerSpec>,
}

impl ScriptedModelSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, GatewayError> {
        let spec: Self = toml::from_str(text).map_err(|e| GatewayError::Spec(e.to_string()))?;
        for r in &spec.rules {
            if r.response.is_none() && r.variants.is_empty() {
                return Err(GatewayError::Spec(format!("rule {:?} has no response", r.name)));
            }
            for resp in r.response.iter().chain(&r.variants) {
                resp.render(Some("x"))?;
            }
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| GatewayError::Spec(format!("{}: {e}", path.display())))
    }
}

/// Deterministic stand-in for a language model. Its only mutable state is
/// a memo of solver results, which never changes an answer.
#[derive(Debug)]
pub struct ScriptedModel {
    spec: ScriptedModelSpec,
    scenarios: Vec<Scenario>,
    next_steps: Mutex<HashMap<(usize, EnvState), String>>,
}

impl Clone for ScriptedModel {
    fn clone(&self) -> Self {
        Self::new(self.spec.clone(), self.scenarios.clone())
    }
}

/// Uniform draw in `[0, 1)` keyed by everything that identifies a call.
fn draw(req: &CompletionRequest, salt: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(req.seed.to_le_bytes());
    h.update(req.sample_index.to_le_bytes());
    h.update(salt.as_bytes());
    h.update(req.prompt.text.as_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    (u64::from_le_bytes(b) >> 11) as f64 / (1u64 << 53) as f64
}

impl ScriptedModel {
    pub fn new(spec: ScriptedModelSpec, scenarios: Vec<Scenario>) -> Self {
        Self {
            spec,
            scenarios,
            next_steps: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &ScriptedModelSpec {
        &self.spec
    }

    fn plan(&self, req: &CompletionRequest, view: &PromptView<'_>, planner: &PlannerSpec) -> Result<String, GatewayError> {
        let no_rule = || GatewayError::NoRuleMatched {
            kind: req.prompt.kind,
            step: view.step,
            observation: view.observation.chars().take(120).collect(),
        };
        let idx = self.scenarios.iter().position(|s| s.task == view.task).ok_or_else(no_rule)?;
        let scenario = &self.scenarios[idx];
        let state = infer_state(scenario, view);
        let key = (idx, state);
        let cached = self.next_steps.lock().unwrap_or_else(|p| p.into_inner()).get(&key).cloned();
        let correct = match cached {
            Some(a) => a,
            None => {
                let a = match solve_from(scenario, &key.1).and_then(|p| p.into_iter().next()) {
                    Some(a) => a,
                    None => explore(scenario, &key.1),
                };
                self.next_steps.lock().unwrap_or_else(|p| p.into_inner()).insert(key, a.clone());
                a
            }
        };
        let wrong: Vec<&str> = view.admissible.iter().copied().filter(|a| *a != correct).collect();
        let pick_wrong = |salt: &str| wrong[(draw(req, salt) * wrong.len() as f64) as usize].to_string();

        let (action, confidence, explanation) = match req.prompt.kind {
            PromptKind::Action => {
                let c = planner.confidence_for(&correct);
                let err = c < planner.error_threshold && !wrong.is_empty() && draw(req, "err") < planner.noise_rate;
                let a = if err { pick_wrong("which") } else { correct.clone() };
                let e = if c < planner.error_threshold {
                    "Not sure this is the right move; something may be missing."
                } else {
                    "This follows directly from what I can see."
                };
                (a, c, e)
            }
            PromptKind::Reflection | PromptKind::Expansion => {
                let err = !wrong.is_empty() && draw(req, "reflect") < planner.reflection_noise_rate;
                if err {
                    (pick_wrong("which"), planner.reflection_wrong_confidence, "A guess; I could not confirm it.")
                } else {
                    (correct.clone(), planner.reflection_confidence, "Rechecked the state; this step advances the goal.")
                }
            }
        };
        let c = Confidence::clamped(confidence).map(|(c, _)| c).unwrap_or(Confidence::ZERO);
        Ok(render_tagged(None, &action, Some(c), Some(explanation)))
    }
}

/// Best guess at the hidden state from what the prompt reveals.
fn infer_state(s: &Scenario, v: &PromptView<'_>) -> EnvState {
    let mut st = EnvState::initial(s);
    st.location = None;
    for a in &v.admissible {
        if let Some(rest) = a.strip_prefix("examine ") {
            if let Some(l) = s.location_index(rest) {
                st.location = Some(l);
            } else if let Some(o) = s.object_index(rest) {
                st.holding = Some(o);
                st.placement[o] = None;
            }
        }
        if let Some(rest) = a.strip_prefix("close ") {
            if let Some(l) = s.location_index(rest) {
                st.open[l] = true;
            }
        }
    }
    // replay visible events in order; the current observation comes last
    let events = v.history.lines().filter(|l| l.starts_with("Observation: ")).map(|l| &l[13..]).chain([v.observation]);
    for text in events {
        for o in 0..s.objects.len() {
            if st.holding == Some(o) {
                continue;
            }
            let name = &s.objects[o].name;
            for l in 0..s.locations.len() {
                let loc = &s.locations[l].name;
                if text.contains(&format!("You move the {name} to the {loc}.")) {
                    st.placement[o] = Some(l);
                }
            }
        }
        for l in 0..s.locations.len() {
            let loc = &s.locations[l].name;
            if text.contains(&format!("You open the {loc}.")) {
                st.open[l] = true;
            }
            if text.contains(&format!("You close the {loc}.")) {
                st.open[l] = false;
            }
        }
    }
    for (k, g) in s.goal.iter().enumerate() {
        if let GoalStep::Use { object } = g {
            if v.history.contains(&format!("You turn on the {object}.")) || v.observation.contains(&format!("You turn on the {object}.")) {
                st.fired[k] = true;
            }
        }
    }
    st
}

/// Visit locations in declaration order when no plan exists from the guess.
fn explore(s: &Scenario, st: &EnvState) -> String {
    let next = match st.location {
        Some(l) => (l + 1) % s.locations.len(),
        None => 0,
    };
    format!("go to {}", s.locations[next].name)
}

impl Gateway for ScriptedModel {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        if req.prompt.text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        let view = PromptView::extract(&req.prompt);
        let text = req.prompt.text.as_str();
        let out = match self.spec.rules.iter().find(|r| r.matches(req.prompt.kind, text, &view)) {
            Some(rule) => rule.pick(req.sample_index)?.render(view.previous_action.as_deref())?,
            None => match &self.spec.planner {
                Some(p) => self.plan(req, &view, p)?,
                None => {
                    return Err(GatewayError::NoRuleMatched {
                        kind: req.prompt.kind,
                        step: view.step,
                        observation: view.observation.chars().take(120).collect(),
                    })
                }
            },
        };
        Ok(out.chars().take(req.max_output).collect())
    }
}
