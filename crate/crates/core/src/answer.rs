//! The three frozen answer-time protocols: the deterministic current
//! answerer (reads structured evidence), the degraded generic answerer
//! (plain-text adjacency heuristic), and the gold executor (compiles the
//! anchor tuple to a program and runs it over the full trajectory).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::anchor::{AnchorTuple, EventRef, Occurrence, QueriedField};
use crate::error::EngineError;
use crate::pack::EvidencePack;
use crate::qa::NOT_ANSWERABLE;
use crate::retrieval::tokenize;
use crate::traj::{parse_step_plain, EventFact, Step, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Current,
    Generic,
    GoldExecutor,
}

impl Protocol {
    pub fn parse(label: &str) -> Option<Protocol> {
        match label {
            "current" => Some(Protocol::Current),
            "generic" => Some(Protocol::Generic),
            "gold_executor" => Some(Protocol::GoldExecutor),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Current => "current",
            Protocol::Generic => "generic",
            Protocol::GoldExecutor => "gold_executor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub protocol: Protocol,
    pub resolved: bool,
}

impl Answer {
    pub fn new(text: String, protocol: Protocol) -> Self {
        let resolved = text != NOT_ANSWERABLE;
        Answer {
            text,
            protocol,
            resolved,
        }
    }

    pub fn unresolved(protocol: Protocol) -> Self {
        Answer {
            text: NOT_ANSWERABLE.to_string(),
            protocol,
            resolved: false,
        }
    }
}

/// A step record reconstructed from evidence lines.
#[derive(Debug, Clone, Default)]
struct StepRecord {
    step: usize,
    action: String,
    location: String,
    inventory: BTreeMap<String, u32>,
    events: BTreeSet<EventFact>,
    state_facts: BTreeSet<String>,
    has_inventory_section: bool,
}

impl From<Step> for StepRecord {
    fn from(s: Step) -> Self {
        StepRecord {
            step: s.index,
            action: s.action,
            location: s.location,
            inventory: s.inventory,
            events: s.events,
            state_facts: s.state_facts,
            has_inventory_section: true,
        }
    }
}

fn merge_plain(record: &mut StepRecord, step: Step) {
    if record.action.is_empty() {
        record.action = step.action;
    }
    if record.location.is_empty() {
        record.location = step.location;
    }
    if record.inventory.is_empty() {
        record.inventory = step.inventory;
        record.has_inventory_section = true;
    }
    record.events.extend(step.events);
    record.state_facts.extend(step.state_facts);
}

fn parse_events_list(text: &str) -> BTreeSet<EventFact> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .filter_map(crate::traj::parse_event)
        .collect()
}

enum DigestSection {
    Objects,
    Inventory(String),
    State(String),
}

/// Splits a digest of the form `objs=... inv=... state=...` where any
/// section may be absent. Section values never contain spaces.
fn split_digest(digest: &str) -> Vec<DigestSection> {
    digest
        .split_whitespace()
        .filter_map(|part| {
            if part.strip_prefix("objs=").is_some() {
                Some(DigestSection::Objects)
            } else if let Some(v) = part.strip_prefix("inv=") {
                Some(DigestSection::Inventory(v.to_string()))
            } else {
                part.strip_prefix("state=")
                    .map(|v| DigestSection::State(v.to_string()))
            }
        })
        .collect()
}

/// Recovers fields from a unit summary. Summaries come in four shapes:
/// a truncated plain line, `<action> at <loc>; events: <evts>`,
/// `events: <evts>`, and `at <loc> sees <objs>`.
fn merge_summary(record: &mut StepRecord, summary: &str) {
    if summary.starts_with("step=") {
        if let Some(step) = parse_step_plain(summary) {
            merge_plain(record, step);
        }
        return;
    }
    if let Some(evts) = summary.strip_prefix("events: ") {
        record.events.extend(parse_events_list(evts));
        return;
    }
    if let Some(rest) = summary.strip_prefix("at ") {
        if let Some((loc, _objs)) = rest.split_once(" sees ") {
            if record.location.is_empty() {
                record.location = loc.to_string();
            }
            return;
        }
    }
    let (head, events) = match summary.split_once("; events: ") {
        Some((head, evts)) => (head, Some(evts)),
        None => (summary, None),
    };
    if let Some((action, loc)) = head.rsplit_once(" at ") {
        if record.action.is_empty() {
            record.action = action.to_string();
        }
        if record.location.is_empty() {
            record.location = loc.to_string();
        }
    }
    if let Some(evts) = events {
        record.events.extend(parse_events_list(evts));
    }
}

/// Reconstructs ordered step records from pack lines. Lines are either the
/// packed `[<step>] <summary> | <digest>` format or bare plain step lines;
/// anything else that does not pretend to be a record is skipped as
/// context. A line that starts like a record but cannot be parsed is a
/// packer bug and surfaces as an error.
fn reconstruct_records(pack: &EvidencePack) -> Result<Vec<StepRecord>, EngineError> {
    let mut by_step: BTreeMap<usize, StepRecord> = BTreeMap::new();
    for (_, line) in &pack.lines {
        if let Some(rest) = line.strip_prefix('[') {
            let (step_str, rest) = rest
                .split_once("] ")
                .ok_or_else(|| EngineError::EvidenceCorrupt(line.clone()))?;
            let step: usize = step_str
                .parse()
                .map_err(|_| EngineError::EvidenceCorrupt(line.clone()))?;
            let (summary, digest) = rest
                .rsplit_once(" | ")
                .ok_or_else(|| EngineError::EvidenceCorrupt(line.clone()))?;
            let mut record = StepRecord {
                step,
                ..StepRecord::default()
            };
            for section in split_digest(digest) {
                match section {
                    DigestSection::Inventory(text) => {
                        record.has_inventory_section = true;
                        for pair in text.split(',').filter(|s| !s.is_empty()) {
                            let (k, v) = pair
                                .rsplit_once(':')
                                .ok_or_else(|| EngineError::EvidenceCorrupt(line.clone()))?;
                            let count: u32 = v
                                .parse()
                                .map_err(|_| EngineError::EvidenceCorrupt(line.clone()))?;
                            record.inventory.insert(k.to_string(), count);
                        }
                    }
                    DigestSection::State(text) => {
                        record
                            .state_facts
                            .extend(text.split(',').filter(|s| !s.is_empty()).map(String::from));
                    }
                    DigestSection::Objects => {}
                }
            }
            merge_summary(&mut record, summary);
            by_step.entry(step).or_insert(record);
        } else if line.starts_with("step=") {
            match parse_step_plain(line) {
                Some(step) => {
                    let mut record: StepRecord = step.into();
                    record.has_inventory_section = true;
                    by_step.entry(record.step).or_insert(record);
                }
                None => return Err(EngineError::EvidenceCorrupt(line.clone())),
            }
        }
        // other lines (topic headers, grouped fragments) carry no record
    }
    Ok(by_step.into_values().collect())
}

fn kth_event_step(
    records: &[StepRecord],
    kind: &str,
    object: Option<&str>,
    occurrence: Occurrence,
) -> Option<usize> {
    let matches: Vec<usize> = records
        .iter()
        .filter(|r| {
            r.events
                .iter()
                .any(|e| e.kind == kind && object.map(|o| e.object == o).unwrap_or(true))
        })
        .map(|r| r.step)
        .collect();
    match occurrence {
        Occurrence::Nth(n) => matches.get(n as usize - 1).copied(),
        Occurrence::Last => matches.last().copied(),
    }
}

fn resolve_ref(records: &[StepRecord], event: &EventRef) -> Option<usize> {
    kth_event_step(
        records,
        &event.kind,
        event.object.as_deref(),
        event.occurrence.unwrap_or(Occurrence::Nth(1)),
    )
}

fn record_at<'a>(records: &'a [StepRecord], step: usize) -> Option<&'a StepRecord> {
    records.iter().find(|r| r.step == step)
}

fn event_token(sel_kind: &str, sel_object: Option<&str>, records: &[StepRecord], step: usize) -> String {
    match sel_object {
        Some(o) => format!("{sel_kind} {o}"),
        None => record_at(records, step)
            .and_then(|r| r.events.iter().find(|e| e.kind == sel_kind))
            .map(EventFact::answer_token)
            .unwrap_or_else(|| sel_kind.to_string()),
    }
}

fn project(records: &[StepRecord], step: usize, field: QueriedField, object: Option<&str>) -> Option<String> {
    let record = record_at(records, step)?;
    match field {
        QueriedField::Action => {
            (!record.action.is_empty()).then(|| record.action.to_lowercase())
        }
        QueriedField::Location => {
            (!record.location.is_empty()).then(|| record.location.to_lowercase())
        }
        QueriedField::Step => Some(record.step.to_string()),
        QueriedField::Item => record
            .events
            .iter()
            .find(|e| e.kind == "gain_item")
            .map(|e| e.object.clone()),
        QueriedField::Count => {
            let object = object?;
            if record.has_inventory_section {
                Some(record.inventory.get(object).copied().unwrap_or(0).to_string())
            } else {
                None
            }
        }
        QueriedField::Order | QueriedField::Answerability => None,
    }
}

/// Deterministic current answerer: reconstructs records from the pack,
/// resolves the anchor within the pack only, and projects the queried
/// field. Resolution failures surface as "not answerable".
pub fn answer_current(pack: &EvidencePack, anchors: &AnchorTuple) -> Result<Answer, EngineError> {
    let records = reconstruct_records(pack)?;
    let protocol = Protocol::Current;
    if records.is_empty() {
        return Ok(Answer::unresolved(protocol));
    }

    let answer = match anchors.queried_field {
        QueriedField::Answerability => None,
        QueriedField::Order => {
            let (Some(first), Some(second)) = (anchors.primary_event(), anchors.second_event.clone())
            else {
                return Ok(Answer::unresolved(protocol));
            };
            match (resolve_ref(&records, &first), resolve_ref(&records, &second)) {
                (Some(s1), Some(s2)) => {
                    if s1 <= s2 {
                        Some(event_token(&first.kind, first.object.as_deref(), &records, s1))
                    } else {
                        Some(event_token(&second.kind, second.object.as_deref(), &records, s2))
                    }
                }
                _ => None,
            }
        }
        QueriedField::Count if anchors.second_event.is_some() => {
            let Some(first) = anchors.primary_event() else {
                return Ok(Answer::unresolved(protocol));
            };
            let second = anchors.second_event.clone().unwrap();
            match (resolve_ref(&records, &first), resolve_ref(&records, &second)) {
                (Some(s1), Some(s2)) => Some(s1.abs_diff(s2).to_string()),
                _ => None,
            }
        }
        QueriedField::Count
            if anchors.trigger_event.is_some() && anchors.occurrence.is_none() =>
        {
            let kind = anchors.trigger_event.as_deref().unwrap();
            let count: usize = records
                .iter()
                .flat_map(|r| r.events.iter())
                .filter(|e| {
                    e.kind == kind
                        && anchors
                            .target_object
                            .as_deref()
                            .map(|o| e.object == o)
                            .unwrap_or(true)
                })
                .count();
            Some(count.to_string())
        }
        field => {
            // selection -> optional offset -> projection
            let selection = if let Some(step) = anchors.target_step {
                record_at(&records, step).map(|r| r.step)
            } else if let Some(event) = anchors.primary_event() {
                resolve_ref(&records, &event)
            } else {
                None
            };
            let Some(sel) = selection else {
                return Ok(Answer::unresolved(protocol));
            };
            let target = match anchors.temporal_offset {
                Some(delta) => {
                    let t = sel as i64 + delta;
                    if t < 0 {
                        return Ok(Answer::unresolved(protocol));
                    }
                    t as usize
                }
                None => sel,
            };
            if field == QueriedField::Step && anchors.temporal_offset.is_none() {
                Some(sel.to_string())
            } else {
                project(&records, target, field, anchors.target_object.as_deref())
            }
        }
    };

    Ok(answer
        .map(|text| Answer::new(text, protocol))
        .unwrap_or_else(|| Answer::unresolved(protocol)))
}

const GENERIC_STOPWORDS: &[&str] = &[
    "what", "where", "was", "the", "did", "at", "a", "an", "of", "to", "in", "for", "how",
    "many", "which", "when", "agent", "step", "steps", "time", "times", "executed", "happened",
    "first", "occur", "occurred", "have", "hold", "passed", "between", "and", "or",
];

/// Degraded generic answerer: ignores structure, scores lines by keyword
/// overlap, and returns the token following the best-matching keyword.
pub fn answer_generic(pack: &EvidencePack, question: &str) -> Answer {
    let protocol = Protocol::Generic;
    let keywords: BTreeSet<String> = tokenize(question)
        .into_iter()
        .filter(|t| !GENERIC_STOPWORDS.contains(&t.as_str()))
        .collect();
    if keywords.is_empty() {
        return Answer::unresolved(protocol);
    }
    let mut best: Option<(usize, usize)> = None; // (overlap, line idx)
    for (idx, (_, line)) in pack.lines.iter().enumerate() {
        let tokens = tokenize(line);
        let overlap = tokens.iter().filter(|t| keywords.contains(*t)).count();
        if overlap > 0 && best.map(|(o, _)| overlap > o).unwrap_or(true) {
            best = Some((overlap, idx));
        }
    }
    let Some((_, idx)) = best else {
        return Answer::unresolved(protocol);
    };
    let tokens = tokenize(&pack.lines[idx].1);
    for pair in tokens.windows(2) {
        if keywords.contains(&pair[0]) {
            return Answer::new(pair[1].clone(), protocol);
        }
    }
    Answer::unresolved(protocol)
}

/// Event selector used by two-event program instructions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSel {
    pub kind: String,
    pub object: Option<String>,
    pub occurrence: Occurrence,
}

impl EventSel {
    fn from_ref(event: &EventRef) -> EventSel {
        EventSel {
            kind: event.kind.clone(),
            object: event.object.clone(),
            occurrence: event.occurrence.unwrap_or(Occurrence::Nth(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    SelectStep(usize),
    SelectOccurrence(EventSel),
    Offset(i64),
    Project {
        field: QueriedField,
        object: Option<String>,
    },
    CountEvents {
        kind: String,
        object: Option<String>,
    },
    Interval {
        first: EventSel,
        second: EventSel,
    },
    CompareOrder {
        first: EventSel,
        second: EventSel,
    },
}

/// A compiled question: selection, optional offset, one terminal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub ops: Vec<Instr>,
}

/// Deterministic mapping from anchor tuples to programs. Unanswerable
/// tuples compile to the empty program, which executes to "not answerable".
pub fn compile_program(anchors: &AnchorTuple) -> Program {
    let mut ops = Vec::new();
    match anchors.queried_field {
        QueriedField::Answerability => {}
        QueriedField::Order => {
            if let (Some(first), Some(second)) = (anchors.primary_event(), &anchors.second_event) {
                ops.push(Instr::CompareOrder {
                    first: EventSel::from_ref(&first),
                    second: EventSel::from_ref(second),
                });
            }
        }
        QueriedField::Count => {
            if let Some(second) = &anchors.second_event {
                if let Some(first) = anchors.primary_event() {
                    ops.push(Instr::Interval {
                        first: EventSel::from_ref(&first),
                        second: EventSel::from_ref(second),
                    });
                }
            } else if let Some(kind) = &anchors.trigger_event {
                if anchors.occurrence.is_some() {
                    ops.push(Instr::SelectOccurrence(EventSel::from_ref(
                        &anchors.primary_event().unwrap(),
                    )));
                    if let Some(delta) = anchors.temporal_offset {
                        ops.push(Instr::Offset(delta));
                    }
                    ops.push(Instr::Project {
                        field: QueriedField::Count,
                        object: anchors.target_object.clone(),
                    });
                } else {
                    ops.push(Instr::CountEvents {
                        kind: kind.clone(),
                        object: anchors.target_object.clone(),
                    });
                }
            } else if let Some(step) = anchors.target_step {
                ops.push(Instr::SelectStep(step));
                if let Some(delta) = anchors.temporal_offset {
                    ops.push(Instr::Offset(delta));
                }
                ops.push(Instr::Project {
                    field: QueriedField::Count,
                    object: anchors.target_object.clone(),
                });
            }
        }
        field => {
            if let Some(step) = anchors.target_step {
                ops.push(Instr::SelectStep(step));
            } else if let Some(event) = anchors.primary_event() {
                ops.push(Instr::SelectOccurrence(EventSel::from_ref(&event)));
            }
            if !ops.is_empty() {
                if let Some(delta) = anchors.temporal_offset {
                    ops.push(Instr::Offset(delta));
                }
                ops.push(Instr::Project {
                    field,
                    object: anchors.target_object.clone(),
                });
            }
        }
    }
    Program { ops }
}

fn trajectory_event_steps(t: &Trajectory, kind: &str, object: Option<&str>) -> Vec<usize> {
    t.steps
        .iter()
        .filter(|s| {
            s.events
                .iter()
                .any(|e| e.kind == kind && object.map(|o| e.object == o).unwrap_or(true))
        })
        .map(|s| s.index)
        .collect()
}

fn resolve_sel(t: &Trajectory, sel: &EventSel) -> Option<usize> {
    let steps = trajectory_event_steps(t, &sel.kind, sel.object.as_deref());
    match sel.occurrence {
        Occurrence::Nth(n) => steps.get(n as usize - 1).copied(),
        Occurrence::Last => steps.last().copied(),
    }
}

fn validate_program(p: &Program) -> Result<(), EngineError> {
    let terminal_count = p
        .ops
        .iter()
        .filter(|op| {
            matches!(
                op,
                Instr::Project { .. }
                    | Instr::CountEvents { .. }
                    | Instr::Interval { .. }
                    | Instr::CompareOrder { .. }
            )
        })
        .count();
    if p.ops.is_empty() {
        return Ok(());
    }
    if terminal_count != 1 {
        return Err(EngineError::InvalidProgram(format!(
            "expected exactly one terminal, found {terminal_count}"
        )));
    }
    if !matches!(
        p.ops.last().unwrap(),
        Instr::Project { .. } | Instr::CountEvents { .. } | Instr::Interval { .. } | Instr::CompareOrder { .. }
    ) {
        return Err(EngineError::InvalidProgram(
            "terminal must come last".to_string(),
        ));
    }
    // selection precedes offset precedes projection
    let mut seen_offset = false;
    for op in &p.ops[..p.ops.len() - 1] {
        match op {
            Instr::SelectStep(_) | Instr::SelectOccurrence(_) => {
                if seen_offset {
                    return Err(EngineError::InvalidProgram(
                        "selection after offset".to_string(),
                    ));
                }
            }
            Instr::Offset(_) => seen_offset = true,
            _ => unreachable!("terminals counted above"),
        }
    }
    Ok(())
}

/// Executes a program against the full trajectory (bypasses memory).
pub fn execute_program(p: &Program, t: &Trajectory) -> Result<Answer, EngineError> {
    validate_program(p)?;
    let protocol = Protocol::GoldExecutor;
    if p.ops.is_empty() {
        return Ok(Answer::unresolved(protocol));
    }
    let mut cursor: Option<usize> = None;
    for op in &p.ops {
        match op {
            Instr::SelectStep(n) => {
                cursor = (*n < t.steps.len()).then_some(*n);
                if cursor.is_none() {
                    return Ok(Answer::unresolved(protocol));
                }
            }
            Instr::SelectOccurrence(sel) => {
                cursor = resolve_sel(t, sel);
                if cursor.is_none() {
                    return Ok(Answer::unresolved(protocol));
                }
            }
            Instr::Offset(delta) => {
                let Some(sel) = cursor else {
                    return Ok(Answer::unresolved(protocol));
                };
                let target = sel as i64 + delta;
                if target < 0 || target >= t.steps.len() as i64 {
                    return Ok(Answer::unresolved(protocol));
                }
                cursor = Some(target as usize);
            }
            Instr::Project { field, object } => {
                let Some(step) = cursor else {
                    return Ok(Answer::unresolved(protocol));
                };
                let s = &t.steps[step];
                let text = match field {
                    QueriedField::Action => Some(s.action.to_lowercase()),
                    QueriedField::Location => Some(s.location.to_lowercase()),
                    QueriedField::Step => Some(s.index.to_string()),
                    QueriedField::Item => s
                        .events
                        .iter()
                        .find(|e| e.kind == "gain_item")
                        .map(|e| e.object.clone()),
                    QueriedField::Count => object
                        .as_deref()
                        .map(|o| s.inventory.get(o).copied().unwrap_or(0).to_string()),
                    _ => None,
                };
                return Ok(text
                    .map(|t| Answer::new(t, protocol))
                    .unwrap_or_else(|| Answer::unresolved(protocol)));
            }
            Instr::CountEvents { kind, object } => {
                let count: usize = t
                    .steps
                    .iter()
                    .flat_map(|s| s.events.iter())
                    .filter(|e| {
                        e.kind == *kind
                            && object.as_deref().map(|o| e.object == o).unwrap_or(true)
                    })
                    .count();
                return Ok(Answer::new(count.to_string(), protocol));
            }
            Instr::Interval { first, second } => {
                return Ok(
                    match (resolve_sel(t, first), resolve_sel(t, second)) {
                        (Some(s1), Some(s2)) => Answer::new(s1.abs_diff(s2).to_string(), protocol),
                        _ => Answer::unresolved(protocol),
                    },
                );
            }
            Instr::CompareOrder { first, second } => {
                return Ok(
                    match (resolve_sel(t, first), resolve_sel(t, second)) {
                        (Some(s1), Some(s2)) => {
                            let (sel, step) = if s1 <= s2 { (first, s1) } else { (second, s2) };
                            let text = match &sel.object {
                                Some(o) => format!("{} {}", sel.kind, o),
                                None => t.steps[step]
                                    .events
                                    .iter()
                                    .find(|e| e.kind == sel.kind)
                                    .map(EventFact::answer_token)
                                    .unwrap_or_else(|| sel.kind.clone()),
                            };
                            Answer::new(text, protocol)
                        }
                        _ => Answer::unresolved(protocol),
                    },
                );
            }
        }
    }
    Ok(Answer::unresolved(protocol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::extract_anchors;
    use crate::anchor::AnchorVocab;
    use crate::envs::{simulate_gridworld, GridWorldConfig};

    fn sample() -> Trajectory {
        simulate_gridworld(&GridWorldConfig {
            step_budget: 40,
            seed: 5,
            ..GridWorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_pack_is_unanswerable() {
        let pack = EvidencePack::empty(192);
        let anchors = AnchorTuple::unanswerable();
        let ans = answer_current(&pack, &anchors).unwrap();
        assert_eq!(ans.text, NOT_ANSWERABLE);
        assert!(!ans.resolved);
    }

    #[test]
    fn corrupt_line_is_an_error() {
        let mut pack = EvidencePack::empty(192);
        pack.lines.push((3, "[3] broken without separator".to_string()));
        let anchors = AnchorTuple::unanswerable();
        assert!(answer_current(&pack, &anchors).is_err());
    }

    #[test]
    fn generic_adjacency_rule() {
        let mut pack = EvidencePack::empty(192);
        pack.lines.push((0, "collect wood".to_string()));
        let ans = answer_generic(&pack, "what did the agent collect");
        assert_eq!(ans.text, "wood");
        let none = answer_generic(&EvidencePack::empty(192), "what did the agent collect");
        assert_eq!(none.text, NOT_ANSWERABLE);
    }

    #[test]
    fn select_step_program() {
        let t = sample();
        let p = Program {
            ops: vec![
                Instr::SelectStep(0),
                Instr::Project {
                    field: QueriedField::Action,
                    object: None,
                },
            ],
        };
        let ans = execute_program(&p, &t).unwrap();
        assert_eq!(ans.text, t.steps[0].action);
    }

    #[test]
    fn absent_occurrence_is_unanswerable() {
        let t = sample();
        let p = Program {
            ops: vec![
                Instr::SelectOccurrence(EventSel {
                    kind: "unlock".to_string(),
                    object: Some("vault".to_string()),
                    occurrence: Occurrence::Nth(1),
                }),
                Instr::Project {
                    field: QueriedField::Step,
                    object: None,
                },
            ],
        };
        let ans = execute_program(&p, &t).unwrap();
        assert_eq!(ans.text, NOT_ANSWERABLE);
    }

    #[test]
    fn malformed_program_rejected() {
        let t = sample();
        let p = Program {
            ops: vec![
                Instr::Project {
                    field: QueriedField::Action,
                    object: None,
                },
                Instr::SelectStep(0),
            ],
        };
        assert!(execute_program(&p, &t).is_err());
    }

    #[test]
    fn offset_template_compiles_to_expected_ops() {
        let vocab = AnchorVocab::registry_only();
        let anchors = extract_anchors(
            "What action was executed 2 steps after the 1st gain_item(wood)?",
            &vocab,
        );
        let p = compile_program(&anchors);
        assert_eq!(p.ops.len(), 3);
        assert!(matches!(p.ops[0], Instr::SelectOccurrence(_)));
        assert!(matches!(p.ops[1], Instr::Offset(2)));
        assert!(matches!(
            p.ops[2],
            Instr::Project {
                field: QueriedField::Action,
                ..
            }
        ));
    }

    #[test]
    fn counting_template_compiles_to_count_events() {
        let mut vocab = AnchorVocab::registry_only();
        vocab.labels.insert("cell_2_3".to_string());
        let anchors = extract_anchors("How many times did the agent visit cell_2_3?", &vocab);
        let p = compile_program(&anchors);
        assert_eq!(
            p.ops,
            vec![Instr::CountEvents {
                kind: "visit".to_string(),
                object: Some("cell_2_3".to_string()),
            }]
        );
    }
}
