//! Canonical trajectory representation shared by every memory method.
//!
//! A trajectory is an ordered list of steps; each step carries the action,
//! the raw observation, the location, visible objects, an inventory
//! snapshot, the events fired at that step, and persistent state facts.
//! Timestamped archives can be converted into pseudo-trajectories so that
//! archive QA reuses the same pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Closed registry of event kinds. Question generation and the program
/// executor must agree on this vocabulary, so it is declared once here.
pub const EVENT_KINDS: &[&str] = &[
    "gain_item",
    "visit",
    "unlock",
    "collect",
    "craft",
    "use_item",
    "observe",
];

/// A discrete event fired at one step, e.g. `gain_item(wood)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventFact {
    pub kind: String,
    pub object: String,
    /// Where the event happened; may be empty when location is irrelevant.
    #[serde(default)]
    pub location: String,
}

impl EventFact {
    pub fn new(kind: &str, object: &str, location: &str) -> Self {
        EventFact {
            kind: kind.to_string(),
            object: object.to_string(),
            location: location.to_string(),
        }
    }

    /// Canonical rendering used in serialized lines: `kind(object)` or
    /// `kind(object)@location` when a location is attached.
    pub fn render(&self) -> String {
        if self.location.is_empty() {
            format!("{}({})", self.kind, self.object)
        } else {
            format!("{}({})@{}", self.kind, self.object, self.location)
        }
    }

    /// Canonical answer token for ordering questions: `kind object`.
    pub fn answer_token(&self) -> String {
        if self.object.is_empty() {
            self.kind.clone()
        } else {
            format!("{} {}", self.kind, self.object)
        }
    }
}

/// One trajectory step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Step {
    pub index: usize,
    pub action: String,
    pub observation: String,
    pub location: String,
    pub visible_objects: BTreeSet<String>,
    pub inventory: BTreeMap<String, u32>,
    pub events: BTreeSet<EventFact>,
    pub state_facts: BTreeSet<String>,
}

/// A full episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_id: String,
    pub env_kind: String,
    pub steps: Vec<Step>,
    pub seed: u64,
}

/// One item of a timestamped personal archive (email, image, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveItem {
    pub item_id: String,
    pub timestamp: f64,
    pub kind: String,
    pub body: String,
}

/// Validation outcome: `Ok` or every violation found, with step indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Ok,
    Violations(Vec<String>),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

/// Checks every structural invariant of a trajectory. Violations are data,
/// not faults: the function never errors.
pub fn validate_trajectory(t: &Trajectory) -> Validation {
    let mut violations = Vec::new();
    if t.steps.is_empty() {
        violations.push("steps nonempty".to_string());
    }
    if t.episode_id.is_empty() {
        violations.push("episode_id nonempty".to_string());
    }
    for (pos, step) in t.steps.iter().enumerate() {
        if step.index != pos {
            violations.push(format!(
                "gap at index {pos}: step carries index {}",
                step.index
            ));
        }
        for event in &step.events {
            if !EVENT_KINDS.contains(&event.kind.as_str()) {
                violations.push(format!(
                    "step {}: unknown event kind '{}'",
                    step.index, event.kind
                ));
            }
        }
    }
    if violations.is_empty() {
        Validation::Ok
    } else {
        Validation::Violations(violations)
    }
}

/// Converts a timestamped archive into a pseudo-trajectory: items sorted by
/// `(timestamp, item_id)`, each becoming one `observe` step.
pub fn convert_archive_to_pseudo_trajectory(
    items: &[ArchiveItem],
    episode_id: &str,
) -> Result<Trajectory, EngineError> {
    if items.is_empty() {
        return Err(EngineError::InvalidInput("archive is empty".to_string()));
    }
    let mut sorted: Vec<&ArchiveItem> = items.iter().collect();
    sorted.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    for pair in sorted.windows(2) {
        if pair[0].timestamp == pair[1].timestamp && pair[0].item_id == pair[1].item_id {
            return Err(EngineError::InvalidInput(
                "non-orderable archive".to_string(),
            ));
        }
    }
    let steps = sorted
        .iter()
        .enumerate()
        .map(|(index, item)| Step {
            index,
            action: "observe".to_string(),
            observation: item.body.clone(),
            location: item.kind.clone(),
            visible_objects: BTreeSet::new(),
            inventory: BTreeMap::new(),
            events: [EventFact::new("observe", &item.item_id, "")]
                .into_iter()
                .collect(),
            state_facts: BTreeSet::new(),
        })
        .collect();
    let traj = Trajectory {
        episode_id: episode_id.to_string(),
        env_kind: "archive".to_string(),
        steps,
        seed: 0,
    };
    debug_assert!(validate_trajectory(&traj).is_ok());
    Ok(traj)
}

/// One-line canonical rendering of a step. All set/map fields are sorted so
/// equal steps always serialize to identical bytes; the observation comes
/// last because it is free text.
pub fn serialize_step_plain(s: &Step) -> String {
    let mut line = String::new();
    let _ = write!(line, "step={} action={}", s.index, s.action);
    let _ = write!(line, " loc={}", s.location);
    let objs: Vec<&str> = s.visible_objects.iter().map(String::as_str).collect();
    let _ = write!(line, " objs={}", objs.join(","));
    let inv: Vec<String> = s
        .inventory
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect();
    let _ = write!(line, " inv={}", inv.join(","));
    let events: Vec<String> = s.events.iter().map(EventFact::render).collect();
    let _ = write!(line, " events={}", events.join(","));
    let facts: Vec<&str> = s.state_facts.iter().map(String::as_str).collect();
    let _ = write!(line, " state={}", facts.join(","));
    let _ = write!(line, " obs={}", s.observation);
    line
}

const PLAIN_FIELD_MARKERS: &[&str] = &[
    " action=", " loc=", " objs=", " inv=", " events=", " state=", " obs=",
];

/// Reference parser for `serialize_step_plain` output. Fields follow the
/// canonical order but may be omitted (abbreviated evidence lines keep a
/// subset). Returns `None` when the line is not a step line at all. Used
/// by the round-trip oracle and by the answer layer when reconstructing
/// records from plain-text evidence.
pub fn parse_step_plain(line: &str) -> Option<Step> {
    let rest = line.strip_prefix("step=")?;
    let end = rest
        .char_indices()
        .find(|(_, c)| !c.is_ascii_digit())
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    let index: usize = rest[..end].parse().ok()?;
    let mut tail = &rest[end..];

    let mut fields: BTreeMap<&str, String> = BTreeMap::new();
    while let Some((marker_idx, pos)) = PLAIN_FIELD_MARKERS
        .iter()
        .enumerate()
        .filter_map(|(i, m)| tail.find(m).map(|p| (i, p)))
        .min_by_key(|&(_, p)| p)
    {
        let marker = PLAIN_FIELD_MARKERS[marker_idx];
        let after = &tail[pos + marker.len()..];
        // the value runs until the next marker (obs takes the whole rest)
        let value_end = if marker == " obs=" {
            after.len()
        } else {
            PLAIN_FIELD_MARKERS
                .iter()
                .filter_map(|m| after.find(m))
                .min()
                .unwrap_or(after.len())
        };
        fields.insert(marker, after[..value_end].to_string());
        tail = &after[value_end..];
    }

    let mut step = Step {
        index,
        action: fields.remove(" action=").unwrap_or_default(),
        observation: fields.remove(" obs=").unwrap_or_default(),
        location: fields.remove(" loc=").unwrap_or_default(),
        ..Step::default()
    };
    for o in fields
        .remove(" objs=")
        .unwrap_or_default()
        .split(',')
        .filter(|s| !s.is_empty())
    {
        step.visible_objects.insert(o.to_string());
    }
    for pair in fields
        .remove(" inv=")
        .unwrap_or_default()
        .split(',')
        .filter(|s| !s.is_empty())
    {
        let (k, v) = pair.rsplit_once(':')?;
        step.inventory.insert(k.to_string(), v.parse().ok()?);
    }
    for ev in fields
        .remove(" events=")
        .unwrap_or_default()
        .split(',')
        .filter(|s| !s.is_empty())
    {
        step.events.insert(parse_event(ev)?);
    }
    for f in fields
        .remove(" state=")
        .unwrap_or_default()
        .split(',')
        .filter(|s| !s.is_empty())
    {
        step.state_facts.insert(f.to_string());
    }
    Some(step)
}

/// Parses `kind(object)` or `kind(object)@location`.
pub fn parse_event(text: &str) -> Option<EventFact> {
    let open = text.find('(')?;
    let close = text.rfind(')')?;
    if close < open {
        return None;
    }
    let kind = &text[..open];
    let object = &text[open + 1..close];
    let location = text[close + 1..].strip_prefix('@').unwrap_or("");
    if kind.is_empty() {
        return None;
    }
    Some(EventFact::new(kind, object, location))
}

/// Truncates a line to at most `max_words` whitespace-delimited words.
pub fn truncate_words(text: &str, max_words: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_words {
        return text.to_string();
    }
    words[..max_words].join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: usize) -> Step {
        Step {
            index,
            action: "collect".to_string(),
            observation: "you see a tree".to_string(),
            location: "cell_1_2".to_string(),
            visible_objects: ["wood".to_string(), "tree".to_string()].into(),
            inventory: [("wood".to_string(), 2)].into(),
            events: [EventFact::new("gain_item", "wood", "cell_1_2")].into(),
            state_facts: ["table:crafted".to_string()].into(),
        }
    }

    fn traj(steps: Vec<Step>) -> Trajectory {
        Trajectory {
            episode_id: "ep0".to_string(),
            env_kind: "gridworld".to_string(),
            steps,
            seed: 1,
        }
    }

    #[test]
    fn empty_steps_is_violation() {
        let v = validate_trajectory(&traj(vec![]));
        assert_eq!(
            v,
            Validation::Violations(vec!["steps nonempty".to_string()])
        );
    }

    #[test]
    fn index_gap_is_reported() {
        let mut steps = vec![step(0), step(1), step(3)];
        steps[1].index = 1;
        let v = validate_trajectory(&traj(steps));
        match v {
            Validation::Violations(list) => {
                assert!(list.iter().any(|m| m.contains("gap at index 2")), "{list:?}");
            }
            Validation::Ok => panic!("expected violation"),
        }
    }

    #[test]
    fn serialize_empty_collections() {
        let s = Step {
            index: 0,
            action: "noop".to_string(),
            ..Step::default()
        };
        let line = serialize_step_plain(&s);
        assert!(line.contains("objs= inv= events= state="), "{line}");
    }

    #[test]
    fn serialize_is_deterministic() {
        assert_eq!(serialize_step_plain(&step(3)), serialize_step_plain(&step(3)));
    }

    #[test]
    fn plain_line_round_trips() {
        let s = step(7);
        let parsed = parse_step_plain(&serialize_step_plain(&s)).unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn archive_singleton() {
        let items = vec![ArchiveItem {
            item_id: "a".to_string(),
            timestamp: 5.0,
            kind: "email".to_string(),
            body: "hello".to_string(),
        }];
        let t = convert_archive_to_pseudo_trajectory(&items, "arc0").unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].index, 0);
        assert_eq!(t.steps[0].action, "observe");
        assert_eq!(t.steps[0].location, "email");
    }

    #[test]
    fn archive_sorts_by_timestamp() {
        let mk = |id: &str, ts: f64| ArchiveItem {
            item_id: id.to_string(),
            timestamp: ts,
            kind: "email".to_string(),
            body: format!("body {id}"),
        };
        let items = vec![mk("x", 3.0), mk("y", 1.0), mk("z", 2.0)];
        let t = convert_archive_to_pseudo_trajectory(&items, "arc0").unwrap();
        let bodies: Vec<&str> = t.steps.iter().map(|s| s.observation.as_str()).collect();
        assert_eq!(bodies, vec!["body y", "body z", "body x"]);
    }

    #[test]
    fn archive_duplicate_key_rejected() {
        let mk = |id: &str, ts: f64| ArchiveItem {
            item_id: id.to_string(),
            timestamp: ts,
            kind: "email".to_string(),
            body: String::new(),
        };
        let items = vec![mk("a", 1.0), mk("a", 1.0)];
        let err = convert_archive_to_pseudo_trajectory(&items, "arc0").unwrap_err();
        assert!(err.to_string().contains("non-orderable archive"));
    }

    #[test]
    fn truncate_words_caps_length() {
        assert_eq!(truncate_words("a b c d", 2), "a b");
        assert_eq!(truncate_words("a b", 5), "a b");
    }
}
