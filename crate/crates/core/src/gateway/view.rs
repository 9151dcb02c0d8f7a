use crate::elicitation::{PromptKind, PromptText};

/// Fields recovered from a rendered prompt. Scripted rules match on these
/// rather than on raw template text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromptView<'a> {
    pub task: &'a str,
    pub step: Option<usize>,
    pub observation: &'a str,
    pub history: &'a str,
    pub admissible: Vec<&'a str>,
    /// Action inside the "previous response" block of reflection and
    /// expansion prompts.
    pub previous_action: Option<String>,
    pub previous_confidence: Option<&'a str>,
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let i = text.find(start)? + start.len();
    let j = text[i..].find(end)?;
    Some(&text[i..i + j])
}

impl<'a> PromptView<'a> {
    pub fn extract(prompt: &'a PromptText) -> Self {
        let t = prompt.text.as_str();
        let task = between(t, "Your task is to: ", "\n").unwrap_or("");
        let history = between(t, "corresponding actions you took: ", "\n\nYou are now at step ").unwrap_or("");
        let (step, observation) = match between(t, "You are now at step ", "\nYour admissible actions") {
            Some(s) => match s.split_once(" and your current observation is: ") {
                Some((n, obs)) => (n.trim().parse().ok(), obs),
                None => (None, ""),
            },
            None => (None, ""),
        };
        let admissible = between(t, "Your admissible actions of the current situation are: [", "].\n")
            .map(|s| s.split(", ").filter(|a| !a.is_empty()).collect())
            .unwrap_or_default();
        let (previous_action, previous_confidence) = match prompt.kind {
            PromptKind::Action => (None, None),
            PromptKind::Reflection | PromptKind::Expansion => {
                let prev = between(t, "**YOUR PREVIOUS RESPONSE:**\n\n", "\n\n---").unwrap_or("");
                let lower = prev.to_ascii_lowercase();
                let action = between(&lower, "<action>", "</action>")
                    .map(|a| a.split_whitespace().collect::<Vec<_>>().join(" "));
                let conf = between(t, "Your previous response had confidence ", ". You mentioned");
                (action, conf)
            }
        };
        PromptView {
            task,
            step,
            observation,
            history,
            admissible,
            previous_action,
            previous_confidence,
        }
    }
}
