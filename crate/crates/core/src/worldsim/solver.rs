use std::collections::{HashMap, VecDeque};

use super::scenario::Scenario;
use super::state::EnvState;
use super::WorldError;

/// Shortest goal-reaching command sequence from the scenario's initial state.
pub fn oracle_solve(s: &Scenario) -> Result<Vec<String>, WorldError> {
    solve_from(s, &EnvState::initial(s))
        .ok_or_else(|| WorldError::Invalid(format!("scenario {} has no goal-reaching plan", s.id)))
}

/// Breadth-first search over the hidden state space. Ties between equally
/// short plans go to the lexicographically earliest command at each depth,
/// because successors are expanded in sorted admissible order.
pub fn solve_from(s: &Scenario, start: &EnvState) -> Option<Vec<String>> {
    if start.is_goal(s) {
        return Some(Vec::new());
    }
    let mut parent: HashMap<EnvState, (EnvState, String)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    let mut seen = std::collections::HashSet::from([start.clone()]);
    while let Some(state) = queue.pop_front() {
        for (command, effect) in state.admissible(s) {
            let mut next = state.clone();
            next.apply(s, effect);
            if !seen.insert(next.clone()) {
                continue;
            }
            parent.insert(next.clone(), (state.clone(), command));
            if next.is_goal(s) {
                let mut plan = Vec::new();
                let mut cur = next;
                while let Some((prev, cmd)) = parent.get(&cur) {
                    plan.push(cmd.clone());
                    cur = prev.clone();
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(next);
        }
    }
    None
}
