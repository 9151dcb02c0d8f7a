use super::scenario::{GoalStep, Scenario};

/// Hidden world state. Transitions never consult randomness, so the noise
/// channel can only ever touch observation text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    /// `None` is the middle of the room.
    pub location: Option<usize>,
    pub holding: Option<usize>,
    /// Per location; only meaningful for containers.
    pub open: Vec<bool>,
    /// Per object; `None` while held.
    pub placement: Vec<Option<usize>>,
    /// Per goal link; set when a `Use` event fires in order.
    pub fired: Vec<bool>,
}

/// Resolved effect of one admissible command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    GoTo(usize),
    ExamineLocation(usize),
    ExamineObject(usize),
    Look,
    Inventory,
    Open(usize),
    Close(usize),
    Take { object: usize, from: usize },
    Move { object: usize, to: usize },
    Use(usize),
}

impl EnvState {
    pub fn initial(s: &Scenario) -> Self {
        Self {
            location: s.start.as_deref().and_then(|n| s.location_index(n)),
            holding: None,
            open: s.locations.iter().map(|l| !l.closed).collect(),
            placement: s.objects.iter().map(|o| s.location_index(&o.location)).collect(),
            fired: vec![false; s.goal.len()],
        }
    }

    fn reachable_inside(&self, s: &Scenario, loc: usize) -> bool {
        !s.locations[loc].container || self.open[loc]
    }

    /// Objects visible at `loc`, in scenario order.
    pub fn contents(&self, s: &Scenario, loc: usize) -> Vec<usize> {
        if !self.reachable_inside(s, loc) {
            return Vec::new();
        }
        (0..s.objects.len()).filter(|&o| self.placement[o] == Some(loc)).collect()
    }

    /// Every admissible command with its effect, sorted by command text.
    pub fn admissible(&self, s: &Scenario) -> Vec<(String, Effect)> {
        let mut out = vec![("look".to_string(), Effect::Look), ("inventory".to_string(), Effect::Inventory)];
        // going to the current location is allowed and re-describes it
        for (i, l) in s.locations.iter().enumerate() {
            out.push((format!("go to {}", l.name), Effect::GoTo(i)));
        }
        if let Some(here) = self.location {
            let name = &s.locations[here].name;
            out.push((format!("examine {name}"), Effect::ExamineLocation(here)));
            if s.locations[here].container {
                if self.open[here] {
                    out.push((format!("close {name}"), Effect::Close(here)));
                } else {
                    out.push((format!("open {name}"), Effect::Open(here)));
                }
            }
            for o in self.contents(s, here) {
                let obj = &s.objects[o];
                if obj.takeable && self.holding.is_none() {
                    out.push((format!("take {} from {name}", obj.name), Effect::Take { object: o, from: here }));
                }
                if obj.usable {
                    out.push((format!("use {}", obj.name), Effect::Use(o)));
                }
            }
            if let Some(h) = self.holding {
                if self.reachable_inside(s, here) {
                    out.push((format!("move {} to {name}", s.objects[h].name), Effect::Move { object: h, to: here }));
                }
            }
        }
        if let Some(h) = self.holding {
            out.push((format!("examine {}", s.objects[h].name), Effect::ExamineObject(h)));
            if s.objects[h].usable {
                out.push((format!("use {}", s.objects[h].name), Effect::Use(h)));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0);
        out
    }

    /// Apply an effect obtained from [`EnvState::admissible`].
    pub fn apply(&mut self, s: &Scenario, effect: Effect) {
        match effect {
            Effect::GoTo(l) => self.location = Some(l),
            Effect::Open(l) => self.open[l] = true,
            Effect::Close(l) => self.open[l] = false,
            Effect::Take { object, .. } => {
                self.placement[object] = None;
                self.holding = Some(object);
            }
            Effect::Move { object, to } => {
                self.placement[object] = Some(to);
                self.holding = None;
            }
            Effect::Use(o) => {
                let k = self.progress(s);
                if let Some(GoalStep::Use { object }) = s.goal.get(k) {
                    if s.object_index(object) == Some(o) {
                        self.fired[k] = true;
                    }
                }
            }
            Effect::ExamineLocation(_) | Effect::ExamineObject(_) | Effect::Look | Effect::Inventory => {}
        }
    }

    fn holds(&self, s: &Scenario, k: usize) -> bool {
        match &s.goal[k] {
            GoalStep::Hold { object } => self.holding.is_some() && self.holding == s.object_index(object),
            GoalStep::At { location } => self.location.is_some() && self.location == s.location_index(location),
            GoalStep::Open { location } => s.location_index(location).is_some_and(|l| self.open[l]),
            GoalStep::Put { object, location } => match (s.object_index(object), s.location_index(location)) {
                (Some(o), Some(l)) => self.placement[o] == Some(l),
                _ => false,
            },
            GoalStep::Use { .. } => self.fired[k],
        }
    }

    /// Length of the satisfied prefix of the goal chain.
    pub fn progress(&self, s: &Scenario) -> usize {
        (0..s.goal.len()).take_while(|&k| self.holds(s, k)).count()
    }

    pub fn is_goal(&self, s: &Scenario) -> bool {
        self.progress(s) == s.goal.len()
    }
}

fn list_phrase(names: &[&str]) -> String {
    match names {
        [] => "nothing".to_string(),
        [one] => format!("a {one}"),
        [init @ .., last] => {
            let head: Vec<String> = init.iter().map(|n| format!("a {n}")).collect();
            format!("{}, and a {last}", head.join(", "))
        }
    }
}

pub(crate) fn describe_location(s: &Scenario, st: &EnvState, loc: usize) -> String {
    let l = &s.locations[loc];
    let names: Vec<&str> = st.contents(s, loc).iter().map(|&o| s.objects[o].name.as_str()).collect();
    if l.container {
        if st.open[loc] {
            format!("The {} is open. In it, you see {}.", l.name, list_phrase(&names))
        } else {
            format!("The {} is closed.", l.name)
        }
    } else {
        format!("On the {}, you see {}.", l.name, list_phrase(&names))
    }
}

pub(crate) fn room_overview(s: &Scenario) -> String {
    let names: Vec<&str> = s.locations.iter().map(|l| l.name.as_str()).collect();
    format!(
        "You are in the middle of a room. Looking quickly around you, you see {}.",
        list_phrase(&names)
    )
}

/// Observation text produced by an effect, rendered against the state
/// after the effect was applied.
pub(crate) fn narrate(s: &Scenario, st: &EnvState, effect: Effect) -> String {
    let loc = |l: usize| s.locations[l].name.as_str();
    let obj = |o: usize| s.objects[o].name.as_str();
    match effect {
        Effect::GoTo(l) => format!("You arrive at {}. {}", loc(l), describe_location(s, st, l)),
        Effect::ExamineLocation(l) => describe_location(s, st, l),
        Effect::ExamineObject(o) => format!("There's nothing special about {}.", obj(o)),
        Effect::Look => match st.location {
            Some(l) => format!("You are facing the {}. Next to it, you see nothing.", loc(l)),
            None => room_overview(s),
        },
        Effect::Inventory => match st.holding {
            Some(o) => format!("You are carrying: a {}.", obj(o)),
            None => "You are not carrying anything.".to_string(),
        },
        Effect::Open(l) => {
            let names: Vec<&str> = st.contents(s, l).iter().map(|&o| obj(o)).collect();
            format!("You open the {}. In it, you see {}.", loc(l), list_phrase(&names))
        }
        Effect::Close(l) => format!("You close the {}.", loc(l)),
        Effect::Take { object, from } => format!("You pick up the {} from the {}.", obj(object), loc(from)),
        Effect::Move { object, to } => format!("You move the {} to the {}.", obj(object), loc(to)),
        Effect::Use(o) => format!("You turn on the {}.", obj(o)),
    }
}
