use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Protocol;
use crate::confidence::Confidence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagField {
    Action,
    Confidence,
    Explanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable completion: {field:?} {reason}")]
pub struct ParseFailure {
    pub field: TagField,
    pub reason: String,
}

impl ParseFailure {
    fn new(field: TagField, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseWarning {
    /// The emitted confidence was outside `[0, 1]` and was saturated.
    ConfidenceClamped { emitted: f64, stored: f64 },
    /// The baseline protocol ignored a malformed `<confidence>` tag.
    ConfidenceIgnored { text: String },
}

/// Structured view of one tagged completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedStep {
    pub think: Option<String>,
    pub action: String,
    pub confidence: Option<Confidence>,
    pub explanation: Option<String>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ParseWarning>,
}

impl ParsedStep {
    pub fn confidence_or_zero(&self) -> Confidence {
        self.confidence.unwrap_or(Confidence::ZERO)
    }

    pub fn explanation_or_empty(&self) -> &str {
        self.explanation.as_deref().unwrap_or("")
    }
}

/// Inner text of the first `<tag>...</tag>` pair, trimmed. Tag names match
/// case-insensitively; content is returned verbatim.
fn first_tag<'a>(raw: &'a str, lower: &str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = lower.find(&open)? + open.len();
    let end = start + lower[start..].find(&close)?;
    Some(raw[start..end].trim())
}

fn parse_confidence_text(text: &str) -> Option<f64> {
    let t = text.trim();
    let (number, scale) = match t.strip_suffix('%') {
        Some(n) => (n.trim_end(), 100.0),
        None => (t, 1.0),
    };
    let ok = !number.is_empty()
        && number
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    if !ok {
        return None;
    }
    let v: f64 = number.parse().ok()?;
    v.is_finite().then_some(v / scale)
}

pub fn parse_tagged_response(completion: &str, protocol: Protocol) -> Result<ParsedStep, ParseFailure> {
    // ASCII lowering keeps byte offsets aligned with `completion`
    let lower = completion.to_ascii_lowercase();
    let mut warnings = Vec::new();

    let action = match first_tag(completion, &lower, "action") {
        Some(a) if !a.is_empty() => a.to_string(),
        Some(_) => return Err(ParseFailure::new(TagField::Action, "is empty")),
        None => return Err(ParseFailure::new(TagField::Action, "tag is missing")),
    };

    let think = first_tag(completion, &lower, "think").map(str::to_string);

    let confidence = match first_tag(completion, &lower, "confidence") {
        Some(text) => match parse_confidence_text(text).and_then(Confidence::clamped) {
            Some((c, moved)) => {
                if moved {
                    let emitted = parse_confidence_text(text).unwrap_or(f64::NAN);
                    log::warn!("clamped emitted confidence {emitted} to {}", c.value());
                    warnings.push(ParseWarning::ConfidenceClamped {
                        emitted,
                        stored: c.value(),
                    });
                }
                Some(c)
            }
            None if protocol.requires_confidence() => {
                return Err(ParseFailure::new(
                    TagField::Confidence,
                    format!("{text:?} is not a number"),
                ))
            }
            None => {
                warnings.push(ParseWarning::ConfidenceIgnored {
                    text: text.to_string(),
                });
                None
            }
        },
        None if protocol.requires_confidence() => {
            return Err(ParseFailure::new(TagField::Confidence, "tag is missing"))
        }
        None => None,
    };

    let explanation = first_tag(completion, &lower, "explanation")
        .filter(|e| !e.is_empty())
        .map(str::to_string);
    if protocol.requires_explanation() && explanation.is_none() {
        return Err(ParseFailure::new(TagField::Explanation, "tag is missing or empty"));
    }

    Ok(ParsedStep {
        think,
        action,
        confidence,
        explanation,
        raw: completion.to_string(),
        warnings,
    })
}

/// Canonical tagged rendering used by the scripted backend. Confidence is
/// written with full round-trip precision.
pub fn render_tagged(
    think: Option<&str>,
    action: &str,
    confidence: Option<Confidence>,
    explanation: Option<&str>,
) -> String {
    let mut out = String::new();
    if let Some(t) = think {
        out.push_str(&format!("<think>{t}</think> "));
    }
    out.push_str(&format!("<action>{action}</action>"));
    if let Some(c) = confidence {
        out.push_str(&format!(" <confidence>{}</confidence>", c.value()));
    }
    if let Some(e) = explanation {
        out.push_str(&format!(" <explanation>{e}</explanation>"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FULL: Protocol = Protocol::ConfidencePlusExplanation;

    #[test]
    fn full_tagged_completion() {
        let p = parse_tagged_response(
            "<think>check desk</think> <action>look</action> <confidence>0.8</confidence> <explanation>might miss lamp</explanation>",
            FULL,
        )
        .unwrap();
        assert_eq!(p.action, "look");
        assert_eq!(p.confidence.unwrap().value(), 0.8);
        assert_eq!(p.think.as_deref(), Some("check desk"));
        assert_eq!(p.explanation.as_deref(), Some("might miss lamp"));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn baseline_needs_only_action() {
        let p = parse_tagged_response("<action>go to desk 1</action>", Protocol::Baseline).unwrap();
        assert_eq!(p.action, "go to desk 1");
        assert!(p.confidence.is_none());
    }

    #[test]
    fn out_of_range_confidence_is_clamped_with_warning() {
        let p = parse_tagged_response(
            "<action>look</action> <confidence>1.7</confidence> <explanation>x</explanation>",
            FULL,
        )
        .unwrap();
        assert_eq!(p.confidence.unwrap().value(), 1.0);
        assert_eq!(
            p.warnings,
            vec![ParseWarning::ConfidenceClamped { emitted: 1.7, stored: 1.0 }]
        );
    }

    #[test]
    fn percent_form() {
        let p = parse_tagged_response(
            "<action>look</action><confidence> 85% </confidence><explanation>e</explanation>",
            FULL,
        )
        .unwrap();
        assert!((p.confidence.unwrap().value() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn first_occurrence_wins_and_tags_are_case_insensitive() {
        let p = parse_tagged_response(
            "<ACTION>Open Drawer 1</Action> <action>look</action> <Confidence>0.3</CONFIDENCE> <confidence>0.9</confidence> <explanation>a</explanation>",
            FULL,
        )
        .unwrap();
        assert_eq!(p.action, "Open Drawer 1");
        assert_eq!(p.confidence.unwrap().value(), 0.3);
    }

    #[test]
    fn failures_name_the_field() {
        let f = |s: &str, p| parse_tagged_response(s, p).unwrap_err().field;
        assert_eq!(f("no tags here", Protocol::Baseline), TagField::Action);
        assert_eq!(f("<action>  </action>", Protocol::Baseline), TagField::Action);
        assert_eq!(f("<action>x</action>", Protocol::ConfidenceOnly), TagField::Confidence);
        assert_eq!(
            f("<action>x</action><confidence>high</confidence>", FULL),
            TagField::Confidence
        );
        assert_eq!(
            f("<action>x</action><confidence>0.5</confidence>", FULL),
            TagField::Explanation
        );
        assert_eq!(
            f("<action>x</action><confidence>0.5</confidence><explanation> </explanation>", FULL),
            TagField::Explanation
        );
        assert_eq!(
            f("<action>x</action><confidence>NaN</confidence><explanation>e</explanation>", FULL),
            TagField::Confidence
        );
    }

    #[test]
    fn confidence_only_allows_missing_explanation() {
        let p = parse_tagged_response("<action>x</action><confidence>0.5</confidence>", Protocol::ConfidenceOnly)
            .unwrap();
        assert!(p.explanation.is_none());
    }

    #[test]
    fn baseline_ignores_malformed_confidence() {
        let p = parse_tagged_response("<action>x</action><confidence>very</confidence>", Protocol::Baseline)
            .unwrap();
        assert!(p.confidence.is_none());
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn unterminated_tag_is_missing() {
        let e = parse_tagged_response("<action>look", Protocol::Baseline).unwrap_err();
        assert_eq!(e.field, TagField::Action);
    }

    #[test]
    fn multibyte_text_around_tags() {
        let p = parse_tagged_response(
            "思考 <ACTION>İstanbul 行く</ACTION> <confidence>0.5</confidence> <explanation>ünsure</explanation>",
            FULL,
        )
        .unwrap();
        assert_eq!(p.action, "İstanbul 行く");
    }

    fn tag_free() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ,.'!?-]{0,40}".prop_map(|s| s.trim().to_string())
    }

    proptest! {
        #[test]
        fn canonical_rendering_round_trips(
            think in proptest::option::of(tag_free()),
            action in tag_free().prop_filter("non-empty", |s| !s.is_empty()),
            conf in 0.0f64..=1.0,
            expl in tag_free().prop_filter("non-empty", |s| !s.is_empty()),
        ) {
            let c = Confidence::new(conf).unwrap();
            let raw = render_tagged(think.as_deref(), &action, Some(c), Some(&expl));
            let p = parse_tagged_response(&raw, FULL).unwrap();
            prop_assert_eq!(p.action, action);
            prop_assert!((p.confidence.unwrap().value() - conf).abs() <= 1e-9);
            prop_assert_eq!(p.explanation.unwrap(), expl);
        }

        #[test]
        fn parser_is_total_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let s = String::from_utf8_lossy(&bytes);
            for p in [Protocol::Baseline, Protocol::ConfidenceOnly, FULL] {
                if let Ok(step) = parse_tagged_response(&s, p) {
                    prop_assert!(!step.action.trim().is_empty());
                }
            }
        }
    }
}
