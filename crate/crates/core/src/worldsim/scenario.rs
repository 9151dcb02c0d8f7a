use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::solver::oracle_solve;
use super::WorldError;

/// A receptacle or room feature the agent can walk to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub name: String,
    /// Containers can be opened and closed; contents are hidden while closed.
    #[serde(default)]
    pub container: bool,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub location: String,
    #[serde(default = "yes")]
    pub takeable: bool,
    #[serde(default)]
    pub usable: bool,
}

fn yes() -> bool {
    true
}

/// One link of the goal chain. All but `Use` are state predicates; `Use`
/// is an event that only counts when every earlier link holds at that moment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalStep {
    Hold { object: String },
    At { location: String },
    Open { location: String },
    Put { object: String, location: String },
    Use { object: String },
}

/// Declarative scenario document (TOML on disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub task: String,
    /// Starting location; absent means the middle of the room.
    #[serde(default)]
    pub start: Option<String>,
    pub max_steps: usize,
    #[serde(default)]
    pub noise_rate: f64,
    /// Names substituted into observations by the noise channel.
    #[serde(default)]
    pub decoys: Vec<String>,
    pub locations: Vec<LocationSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub goal: Vec<GoalStep>,
}

pub const DEFAULT_DECOYS: &[&str] = &["vase 1", "statue 1", "cellphone 1", "pencil 1"];

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, WorldError> {
        let s: Scenario = toml::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            WorldError::Parse(m) => WorldError::Parse(format!("{}: {m}", path.display())),
            WorldError::Invalid(m) => WorldError::Invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn decoys(&self) -> Vec<String> {
        if self.decoys.is_empty() {
            DEFAULT_DECOYS.iter().map(|s| s.to_string()).collect()
        } else {
            self.decoys.clone()
        }
    }

    /// Schema checks followed by a solvability check within `max_steps`.
    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |m: String| Err(WorldError::Invalid(m));
        if self.id.trim().is_empty() {
            return invalid("scenario id is empty".into());
        }
        if self.task.trim().is_empty() {
            return invalid("task is empty".into());
        }
        if self.max_steps == 0 {
            return invalid("max_steps must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return invalid(format!("noise_rate {} outside [0, 1]", self.noise_rate));
        }
        if self.locations.is_empty() {
            return invalid("no locations".into());
        }
        if self.goal.is_empty() {
            return invalid("goal chain is empty".into());
        }
        let mut names = BTreeSet::new();
        for n in self.locations.iter().map(|l| &l.name).chain(self.objects.iter().map(|o| &o.name)) {
            if n.trim().is_empty() || n != &n.to_lowercase() || n.contains(',') {
                return invalid(format!("bad name {n:?}: names are lowercase without commas"));
            }
            if !names.insert(n.as_str()) {
                return invalid(format!("duplicate name {n:?}"));
            }
        }
        for l in &self.locations {
            if l.closed && !l.container {
                return invalid(format!("{} is closed but not a container", l.name));
            }
        }
        if let Some(s) = &self.start {
            if self.location_index(s).is_none() {
                return invalid(format!("unknown start location {s:?}"));
            }
        }
        for o in &self.objects {
            if self.location_index(&o.location).is_none() {
                return invalid(format!("object {} placed at unknown location {}", o.name, o.location));
            }
        }
        for g in &self.goal {
            let (obj, loc) = match g {
                GoalStep::Hold { object } | GoalStep::Use { object } => (Some(object), None),
                GoalStep::At { location } | GoalStep::Open { location } => (None, Some(location)),
                GoalStep::Put { object, location } => (Some(object), Some(location)),
            };
            if let Some(o) = obj {
                if self.object_index(o).is_none() {
                    return invalid(format!("goal names unknown object {o:?}"));
                }
            }
            if let Some(l) = loc {
                if self.location_index(l).is_none() {
                    return invalid(format!("goal names unknown location {l:?}"));
                }
            }
        }
        let plan = oracle_solve(self)?;
        if plan.len() > self.max_steps {
            return invalid(format!(
                "shortest plan needs {} steps but max_steps is {}",
                plan.len(),
                self.max_steps
            ));
        }
        Ok(())
    }
}
