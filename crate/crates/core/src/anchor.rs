//! Rule/template-driven extraction of the question's anchor tuple: target
//! object, trigger event, queried field, occurrence index, temporal offset,
//! and (for two-event questions) a second event reference.

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::traj::{Trajectory, EVENT_KINDS};

/// What the question asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueriedField {
    Action,
    Location,
    Item,
    Count,
    Step,
    Order,
    Answerability,
}

/// Which occurrence of an event an anchor refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occurrence {
    Nth(u32),
    Last,
}

impl Occurrence {
    pub fn render(&self) -> String {
        match self {
            Occurrence::Nth(1) => "1st".to_string(),
            Occurrence::Nth(2) => "2nd".to_string(),
            Occurrence::Nth(3) => "3rd".to_string(),
            Occurrence::Nth(n) => format!("{n}th"),
            Occurrence::Last => "last".to_string(),
        }
    }

    fn parse(token: &str) -> Option<Occurrence> {
        match token {
            "1st" | "first" => Some(Occurrence::Nth(1)),
            "2nd" | "second" => Some(Occurrence::Nth(2)),
            "3rd" | "third" => Some(Occurrence::Nth(3)),
            "last" => Some(Occurrence::Last),
            _ => None,
        }
    }
}

/// An event cue with its own object and occurrence marker. The primary cue
/// lives in `AnchorTuple::trigger_event`/`target_object`/`occurrence`;
/// interval and ordering questions carry a second one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRef {
    pub kind: String,
    pub object: Option<String>,
    pub occurrence: Option<Occurrence>,
}

/// The parsed question cues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorTuple {
    pub target_object: Option<String>,
    pub trigger_event: Option<String>,
    pub queried_field: QueriedField,
    pub occurrence: Option<Occurrence>,
    pub temporal_offset: Option<i64>,
    pub target_step: Option<usize>,
    pub second_event: Option<EventRef>,
}

impl AnchorTuple {
    pub fn unanswerable() -> Self {
        AnchorTuple {
            target_object: None,
            trigger_event: None,
            queried_field: QueriedField::Answerability,
            occurrence: None,
            temporal_offset: None,
            target_step: None,
            second_event: None,
        }
    }

    pub fn primary_event(&self) -> Option<EventRef> {
        self.trigger_event.as_ref().map(|kind| EventRef {
            kind: kind.clone(),
            object: self.target_object.clone(),
            occurrence: self.occurrence,
        })
    }
}

/// Maps natural verbs in questions onto registry event kinds.
pub const VERB_TABLE: &[(&str, &str)] = &[
    ("gain", "gain_item"),
    ("gained", "gain_item"),
    ("collect", "gain_item"),
    ("collected", "gain_item"),
    ("visit", "visit"),
    ("visited", "visit"),
    ("unlock", "unlock"),
    ("unlocked", "unlock"),
    ("craft", "craft"),
    ("crafted", "craft"),
    ("use", "use_item"),
    ("used", "use_item"),
    ("observe", "observe"),
    ("observed", "observe"),
];

pub fn verb_for_kind(kind: &str) -> &'static str {
    match kind {
        "gain_item" => "gain",
        "visit" => "visit",
        "unlock" => "unlock",
        "craft" => "craft",
        "use_item" => "use",
        "collect" => "collect",
        _ => "observe",
    }
}

/// Vocabulary the extractor matches against: the closed event-kind registry
/// plus object/location labels (usually harvested from the trajectory).
#[derive(Debug, Clone, Default)]
pub struct AnchorVocab {
    pub kinds: BTreeSet<String>,
    pub labels: BTreeSet<String>,
}

impl AnchorVocab {
    pub fn registry_only() -> Self {
        AnchorVocab {
            kinds: EVENT_KINDS.iter().map(|k| k.to_string()).collect(),
            labels: BTreeSet::new(),
        }
    }

    pub fn from_trajectory(t: &Trajectory) -> Self {
        let mut vocab = AnchorVocab::registry_only();
        for step in &t.steps {
            vocab.labels.insert(step.location.clone());
            for o in &step.visible_objects {
                vocab.labels.insert(o.clone());
            }
            for item in step.inventory.keys() {
                vocab.labels.insert(item.clone());
            }
            for e in &step.events {
                if !e.object.is_empty() {
                    vocab.labels.insert(e.object.clone());
                }
            }
        }
        vocab
    }
}

struct Patterns {
    offset: Regex,
    target_step: Regex,
    functional: Regex,
    verb_with_ord: Regex,
    verb_plain: Regex,
    kind_events: Regex,
}

fn patterns() -> &'static Patterns {
    use std::sync::OnceLock;
    static CELL: OnceLock<Patterns> = OnceLock::new();
    CELL.get_or_init(|| Patterns {
        offset: Regex::new(r"(\d+) steps? (after|before)").unwrap(),
        target_step: Regex::new(r"at step (\d+)").unwrap(),
        functional: Regex::new(
            r"(?:the (1st|first|2nd|second|3rd|third|last) )?([a-z][a-z0-9_]*)\(([^)]*)\)",
        )
        .unwrap(),
        verb_with_ord: Regex::new(
            r"did the agent ([a-z_]+) (?:the )?([a-z0-9_]+) for the (1st|first|2nd|second|3rd|third|last) time",
        )
        .unwrap(),
        verb_plain: Regex::new(r"did the agent ([a-z_]+) (?:the )?([a-z0-9_]+)").unwrap(),
        kind_events: Regex::new(r"how many ([a-z_]+) events").unwrap(),
    })
}

fn normalize_question(q: &str) -> String {
    q.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn queried_field(q: &str) -> Option<QueriedField> {
    if q.contains("which happened first") {
        Some(QueriedField::Order)
    } else if q.contains("what action") {
        Some(QueriedField::Action)
    } else if q.contains("what item") {
        Some(QueriedField::Item)
    } else if q.starts_with("where") || q.contains(" where ") {
        Some(QueriedField::Location)
    } else if q.contains("how many") {
        Some(QueriedField::Count)
    } else if q.contains("at which step") || q.starts_with("when ") {
        Some(QueriedField::Step)
    } else {
        None
    }
}

/// Extracts the anchor tuple from a question. Pure keyword/pattern rules;
/// unknown questions degrade to an `answerability` tuple.
pub fn extract_anchors(question: &str, vocab: &AnchorVocab) -> AnchorTuple {
    let q = normalize_question(question);
    let p = patterns();

    let field = queried_field(&q);

    let temporal_offset = p.offset.captures(&q).map(|c| {
        let n: i64 = c[1].parse().unwrap_or(0);
        if &c[2] == "before" {
            -n
        } else {
            n
        }
    });
    let target_step = p
        .target_step
        .captures(&q)
        .and_then(|c| c[1].parse::<usize>().ok());

    // event cues: functional `kind(object)` forms first, then natural verbs
    let mut events: Vec<EventRef> = Vec::new();
    for cap in p.functional.captures_iter(&q) {
        let kind = cap[2].to_string();
        if !vocab.kinds.contains(&kind) {
            continue;
        }
        let object = if cap[3].is_empty() {
            None
        } else {
            Some(cap[3].to_string())
        };
        let occurrence = cap.get(1).and_then(|m| Occurrence::parse(m.as_str()));
        events.push(EventRef {
            kind,
            object,
            occurrence,
        });
    }
    if events.is_empty() {
        let verb_cap = p
            .verb_with_ord
            .captures(&q)
            .map(|c| (c[1].to_string(), c[2].to_string(), Occurrence::parse(&c[3])))
            .or_else(|| {
                p.verb_plain
                    .captures(&q)
                    .map(|c| (c[1].to_string(), c[2].to_string(), None))
            });
        if let Some((verb, object, occurrence)) = verb_cap {
            if let Some((_, kind)) = VERB_TABLE.iter().find(|(v, _)| *v == verb) {
                events.push(EventRef {
                    kind: kind.to_string(),
                    object: Some(object),
                    occurrence,
                });
            }
        }
    }
    if events.is_empty() {
        if let Some(cap) = p.kind_events.captures(&q) {
            let kind = cap[1].to_string();
            if vocab.kinds.contains(&kind) {
                events.push(EventRef {
                    kind,
                    object: None,
                    occurrence: None,
                });
            }
        }
    }

    let mut tuple = AnchorTuple {
        target_object: None,
        trigger_event: None,
        queried_field: QueriedField::Answerability,
        occurrence: None,
        temporal_offset,
        target_step,
        second_event: None,
    };
    let mut it = events.into_iter();
    if let Some(first) = it.next() {
        tuple.trigger_event = Some(first.kind);
        tuple.target_object = first.object;
        tuple.occurrence = first.occurrence;
    }
    tuple.second_event = it.next();

    // with no event cue, fall back to a vocabulary label for the target
    // object (inventory questions name a bare item)
    if tuple.trigger_event.is_none() && tuple.target_object.is_none() {
        for word in q.split_whitespace() {
            let word = word.trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '_');
            if vocab.labels.contains(word) {
                tuple.target_object = Some(word.to_string());
                break;
            }
        }
    }

    match field {
        Some(f) => tuple.queried_field = f,
        None => {
            // no interrogative pattern at all: answerability path
            if tuple.trigger_event.is_none()
                && tuple.target_step.is_none()
                && tuple.target_object.is_none()
            {
                return AnchorTuple::unanswerable();
            }
        }
    }
    if tuple.trigger_event.is_none() {
        tuple.occurrence = None;
    }
    tuple
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> AnchorVocab {
        let mut v = AnchorVocab::registry_only();
        v.labels.extend(
            ["wood", "cell_2_3", "hall", "lamp", "door_0"]
                .iter()
                .map(|s| s.to_string()),
        );
        v
    }

    #[test]
    fn offset_template_inverts() {
        let t = extract_anchors(
            "What action was executed 2 steps after the 1st gain_item(wood)?",
            &vocab(),
        );
        assert_eq!(t.queried_field, QueriedField::Action);
        assert_eq!(t.trigger_event.as_deref(), Some("gain_item"));
        assert_eq!(t.target_object.as_deref(), Some("wood"));
        assert_eq!(t.occurrence, Some(Occurrence::Nth(1)));
        assert_eq!(t.temporal_offset, Some(2));
    }

    #[test]
    fn target_step_pattern() {
        let t = extract_anchors("Where was the agent at step 14?", &vocab());
        assert_eq!(t.queried_field, QueriedField::Location);
        assert_eq!(t.target_step, Some(14));
        assert!(t.trigger_event.is_none());
    }

    #[test]
    fn natural_verb_with_ordinal() {
        let t = extract_anchors(
            "At which step did the agent gain wood for the 2nd time?",
            &vocab(),
        );
        assert_eq!(t.queried_field, QueriedField::Step);
        assert_eq!(t.trigger_event.as_deref(), Some("gain_item"));
        assert_eq!(t.target_object.as_deref(), Some("wood"));
        assert_eq!(t.occurrence, Some(Occurrence::Nth(2)));
    }

    #[test]
    fn two_event_interval() {
        let t = extract_anchors(
            "How many steps passed between the 1st gain_item(wood) and the last visit(cell_2_3)?",
            &vocab(),
        );
        assert_eq!(t.queried_field, QueriedField::Count);
        assert_eq!(t.trigger_event.as_deref(), Some("gain_item"));
        assert_eq!(t.occurrence, Some(Occurrence::Nth(1)));
        let second = t.second_event.unwrap();
        assert_eq!(second.kind, "visit");
        assert_eq!(second.object.as_deref(), Some("cell_2_3"));
        assert_eq!(second.occurrence, Some(Occurrence::Last));
    }

    #[test]
    fn unknown_text_degrades_to_answerability() {
        let t = extract_anchors("please sing a song", &vocab());
        assert_eq!(t, AnchorTuple::unanswerable());
    }

    #[test]
    fn idempotent_under_case_and_whitespace() {
        let a = extract_anchors("Where   was the agent AT STEP 9?", &vocab());
        let b = extract_anchors("where was the agent at step 9?", &vocab());
        assert_eq!(a, b);
    }
}
