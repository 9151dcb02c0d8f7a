use std::collections::BTreeMap;

pub const ACTION: &str = include_str!("../../templates/action.txt");
pub const ELICITATION_SUFFIX: &str = include_str!("../../templates/elicitation_suffix.txt");
pub const REFLECTION: &str = include_str!("../../templates/reflection.txt");
pub const EXPANSION: &str = include_str!("../../templates/expansion.txt");

/// Slot names recognised by [`render`].
pub const SLOTS: &[&str] = &[
    "task_description",
    "step_count",
    "history_length",
    "action_history",
    "current_step",
    "current_observation",
    "admissible_actions",
    "confidence",
    "explanation",
    "full_context",
    "previous_response",
];

/// Single-pass `{slot}` substitution. Substituted values are never rescanned,
/// so observation text containing braces cannot inject slots.
pub fn render(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                let name = &after[..close];
                match values.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    // templates end with a newline on disk; prompts do not
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}
