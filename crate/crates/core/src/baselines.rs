//! Comparison interfaces: no-memory, plain-chunk RAG, graph retrieval
//! without a specialized reader, context-length controls, an RTK-style
//! generic compressor, and three simplified neighbor memories (note-link,
//! hierarchical, and efficiency-oriented designs).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::pack::{plain_line, token_count, EvidencePack};
use crate::retrieval::{token_f1, tokenize};
use crate::traj::{Step, Trajectory};

/// Paper-matched segment sizes for the neighbor baselines.
pub const HIER_SEGMENT_SIZE: usize = 8;
pub const LIGHT_SEGMENT_SIZE: usize = 10;
/// Shared low-token budget for the neighbor baselines.
pub const NEIGHBOR_BUDGET: usize = 192;

/// Only the question and the current (final) observation.
pub fn no_memory_interface(t: &Trajectory) -> EvidencePack {
    let last = t.steps.last().expect("validated trajectory");
    EvidencePack::from_lines(vec![(last.index, plain_line(last))])
}

/// Every step's full serialized line; unbounded budget.
pub fn full_history_interface(t: &Trajectory) -> EvidencePack {
    EvidencePack::from_lines(
        t.steps
            .iter()
            .map(|s| (s.index, plain_line(s)))
            .collect(),
    )
}

/// One line per step keeping only the step index and the action keyword.
pub fn summarize_then_answer_interface(t: &Trajectory) -> EvidencePack {
    EvidencePack::from_lines(
        t.steps
            .iter()
            .map(|s| {
                let keyword = s.action.split_whitespace().next().unwrap_or("");
                (s.index, format!("step={} action={}", s.index, keyword))
            })
            .collect(),
    )
}

/// Plain-text chunk index for vanilla RAG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub chunks: Vec<(usize, usize, String)>, // (start, end exclusive, text)
    pub chunk_size: usize,
    pub stride: usize,
}

pub fn build_chunk_index(t: &Trajectory, chunk_size: usize, stride: usize) -> ChunkIndex {
    let mut chunks = Vec::new();
    let n = t.steps.len();
    let mut start = 0usize;
    while start < n {
        let end = (start + chunk_size).min(n);
        let text: Vec<String> = t.steps[start..end].iter().map(plain_line).collect();
        chunks.push((start, end, text.join("\n")));
        if end == n {
            break;
        }
        start += stride;
    }
    ChunkIndex {
        chunks,
        chunk_size,
        stride,
    }
}

/// Standard similarity-based RAG over flattened chunks: top-k chunks by
/// lexical overlap, no budget cap.
pub fn vanilla_rag_retrieve(idx: &ChunkIndex, t: &Trajectory, question: &str, top_k: usize) -> EvidencePack {
    let mut scored: Vec<(f64, usize)> = idx
        .chunks
        .iter()
        .enumerate()
        .map(|(i, (_, _, text))| (token_f1(question, text), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut lines = Vec::new();
    for (_, chunk_idx) in scored.into_iter().take(top_k) {
        let (start, end, _) = idx.chunks[chunk_idx];
        for step in &t.steps[start..end] {
            lines.push((step.index, plain_line(step)));
        }
    }
    EvidencePack::from_lines(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Step,
    Entity,
    Location,
}

/// Graph memory: step, entity, and location nodes with at/has/did/mention/
/// next edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajGraph {
    pub nodes: Vec<(NodeKind, String)>,
    pub edges: Vec<(usize, String, usize)>,
    step_lines: Vec<String>,
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

pub fn graph_build(t: &Trajectory) -> TrajGraph {
    let mut nodes: Vec<(NodeKind, String)> = Vec::new();
    let mut index: BTreeMap<(NodeKind, String), usize> = BTreeMap::new();
    let mut edges: Vec<(usize, String, usize)> = Vec::new();

    let intern = |nodes: &mut Vec<(NodeKind, String)>,
                      index: &mut BTreeMap<(NodeKind, String), usize>,
                      kind: NodeKind,
                      label: &str| {
        *index.entry((kind, label.to_string())).or_insert_with(|| {
            nodes.push((kind, label.to_string()));
            nodes.len() - 1
        })
    };

    for step in &t.steps {
        let sid = intern(
            &mut nodes,
            &mut index,
            NodeKind::Step,
            &format!("step_{}", step.index),
        );
        let loc = intern(&mut nodes, &mut index, NodeKind::Location, &step.location);
        edges.push((sid, "at".to_string(), loc));
        for item in step.inventory.keys() {
            let ent = intern(&mut nodes, &mut index, NodeKind::Entity, item);
            edges.push((sid, "has".to_string(), ent));
        }
        if let Some(head) = step.action.split_whitespace().next() {
            let ent = intern(&mut nodes, &mut index, NodeKind::Entity, head);
            edges.push((sid, "did".to_string(), ent));
        }
        let mentions: BTreeSet<&str> = step
            .visible_objects
            .iter()
            .map(String::as_str)
            .chain(step.events.iter().map(|e| e.object.as_str()))
            .filter(|s| !s.is_empty())
            .collect();
        for obj in mentions {
            let ent = intern(&mut nodes, &mut index, NodeKind::Entity, obj);
            edges.push((sid, "mention".to_string(), ent));
        }
        if step.index + 1 < t.steps.len() {
            let next = intern(
                &mut nodes,
                &mut index,
                NodeKind::Step,
                &format!("step_{}", step.index + 1),
            );
            edges.push((sid, "next".to_string(), next));
        }
    }

    let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (a, _, b) in &edges {
        adjacency.entry(*a).or_default().insert(*b);
        adjacency.entry(*b).or_default().insert(*a);
    }

    TrajGraph {
        nodes,
        edges,
        step_lines: t.steps.iter().map(plain_line).collect(),
        adjacency,
    }
}

/// Seeds nodes whose whole label is covered by the question tokens,
/// expands breadth-first up to `hops` over all edges, and emits the full
/// serialized lines of every step node reached. Deliberately verbose:
/// entity seeds pull in all mentioning steps plus their neighbors.
pub fn graph_retrieve(g: &TrajGraph, question: &str, hops: usize) -> EvidencePack {
    let qtokens: BTreeSet<String> = tokenize(question).into_iter().collect();
    let mut frontier: BTreeSet<usize> = g
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, (_, label))| {
            let toks = tokenize(label);
            !toks.is_empty() && toks.iter().all(|t| qtokens.contains(t))
        })
        .map(|(i, _)| i)
        .collect();
    let mut visited = frontier.clone();
    for _ in 0..hops {
        let mut next: BTreeSet<usize> = BTreeSet::new();
        for node in &frontier {
            for neighbor in g.adjacency.get(node).into_iter().flatten() {
                if visited.insert(*neighbor) {
                    next.insert(*neighbor);
                }
            }
        }
        frontier = next;
    }

    let mut steps: BTreeSet<usize> = BTreeSet::new();
    for &node in &visited {
        if let (NodeKind::Step, label) = &g.nodes[node] {
            if let Some(i) = label.strip_prefix("step_").and_then(|s| s.parse().ok()) {
                steps.insert(i);
            }
        }
    }

    EvidencePack::from_lines(
        steps
            .into_iter()
            .filter(|&s| s < g.step_lines.len())
            .map(|s| (s, g.step_lines[s].clone()))
            .collect(),
    )
}

/// RTK-style generic compressor: text-only filtering, grouping, truncation,
/// and deduplication over rendered lines. It never sees structured fields
/// or anchors.
pub fn rtk_compress(raw: &EvidencePack, question: &str, budget: usize) -> EvidencePack {
    // dedup identical lines
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (step, line) in &raw.lines {
        if seen.insert(line.as_str()) {
            lines.push((*step, line.clone()));
        }
    }
    // group consecutive lines with the same action token
    let action_of = |line: &str| -> Option<String> {
        line.split("action=")
            .nth(1)
            .and_then(|rest| rest.split_whitespace().next())
            .map(|s| s.to_string())
    };
    let mut grouped: Vec<(usize, String)> = Vec::new();
    let mut i = 0usize;
    while i < lines.len() {
        let action = action_of(&lines[i].1);
        let mut j = i + 1;
        if action.is_some() {
            while j < lines.len() && action_of(&lines[j].1) == action {
                j += 1;
            }
        }
        if j - i >= 2 {
            grouped.push((lines[i].0, format!("{} x{}", lines[i].1, j - i)));
        } else {
            grouped.push(lines[i].clone());
        }
        i = j;
    }
    // rank lines by question-keyword overlap, then truncate to budget
    let qtokens: BTreeSet<String> = tokenize(question).into_iter().collect();
    let mut ranked: Vec<(usize, (usize, String))> = grouped
        .into_iter()
        .map(|entry| {
            let overlap = tokenize(&entry.1)
                .iter()
                .filter(|t| qtokens.contains(*t))
                .count();
            (overlap, entry)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1 .0.cmp(&b.1 .0)));
    let mut kept: Vec<(usize, String)> = Vec::new();
    let mut cost = 0usize;
    for (_, (step, line)) in ranked {
        let c = token_count(&line);
        if cost + c <= budget {
            cost += c;
            kept.push((step, line));
        }
    }
    kept.sort();
    let mut pack = EvidencePack::from_lines(kept);
    pack.budget = budget;
    pack
}

/// Note-link memory: per-step notes with keyword tags and links between
/// notes sharing at least two keywords.
#[derive(Debug, Clone)]
pub struct NoteStore {
    pub notes: Vec<(usize, String, BTreeSet<String>)>,
    pub links: BTreeMap<usize, BTreeSet<usize>>,
}

fn note_keywords(step: &Step) -> BTreeSet<String> {
    let mut kw: BTreeSet<String> = BTreeSet::new();
    kw.insert(step.location.clone());
    kw.extend(step.visible_objects.iter().cloned());
    for e in &step.events {
        kw.insert(e.kind.clone());
        if !e.object.is_empty() {
            kw.insert(e.object.clone());
        }
    }
    kw.remove("");
    kw
}

pub fn build_note_store(t: &Trajectory) -> NoteStore {
    let notes: Vec<(usize, String, BTreeSet<String>)> = t
        .steps
        .iter()
        .map(|s| (s.index, plain_line(s), note_keywords(s)))
        .collect();
    let mut links: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for i in 0..notes.len() {
        for j in i + 1..notes.len() {
            let shared = notes[i].2.intersection(&notes[j].2).count();
            if shared >= 2 {
                links.entry(i).or_default().insert(j);
                links.entry(j).or_default().insert(i);
            }
        }
    }
    NoteStore { notes, links }
}

/// Hierarchical memory: fixed-size segments with summaries over member steps.
#[derive(Debug, Clone)]
pub struct HierStore {
    pub segments: Vec<(usize, usize, String)>, // (start, end exclusive, summary)
    pub step_lines: Vec<String>,
}

pub fn build_hier_store(t: &Trajectory) -> HierStore {
    let mut segments = Vec::new();
    let n = t.steps.len();
    let mut start = 0usize;
    while start < n {
        let end = (start + HIER_SEGMENT_SIZE).min(n);
        let slice = &t.steps[start..end];
        let locations: BTreeSet<&str> = slice.iter().map(|s| s.location.as_str()).collect();
        let actions: BTreeSet<&str> = slice
            .iter()
            .filter_map(|s| s.action.split_whitespace().next())
            .collect();
        let events: BTreeSet<String> = slice
            .iter()
            .flat_map(|s| s.events.iter())
            .map(|e| format!("{}({})", e.kind, e.object))
            .collect();
        let summary = format!(
            "steps {}-{}: locations {}; actions {}; events {}",
            start,
            end - 1,
            locations.into_iter().collect::<Vec<_>>().join(","),
            actions.into_iter().collect::<Vec<_>>().join(","),
            events.into_iter().collect::<Vec<_>>().join(",")
        );
        segments.push((start, end, summary));
        start = end;
    }
    HierStore {
        segments,
        step_lines: t.steps.iter().map(plain_line).collect(),
    }
}

/// Efficiency-oriented memory: one compressed line per step plus a topic
/// line every ten steps (topics are stored, not retrieved).
#[derive(Debug, Clone)]
pub struct LightStore {
    pub lines: Vec<(usize, String)>,
    pub topics: Vec<String>,
}

pub fn build_light_store(t: &Trajectory) -> LightStore {
    let lines: Vec<(usize, String)> = t
        .steps
        .iter()
        .map(|s| {
            let events: Vec<String> = s
                .events
                .iter()
                .map(|e| format!("{}({})", e.kind, e.object))
                .collect();
            (
                s.index,
                format!(
                    "step={} action={} loc={} events={}",
                    s.index,
                    s.action,
                    s.location,
                    events.join(",")
                ),
            )
        })
        .collect();
    let mut topics = Vec::new();
    let mut start = 0usize;
    while start < t.steps.len() {
        let end = (start + LIGHT_SEGMENT_SIZE).min(t.steps.len());
        let slice = &t.steps[start..end];
        let locations: BTreeSet<&str> = slice.iter().map(|s| s.location.as_str()).collect();
        let gained: BTreeSet<&str> = slice
            .iter()
            .flat_map(|s| s.events.iter())
            .filter(|e| e.kind == "gain_item")
            .map(|e| e.object.as_str())
            .collect();
        topics.push(format!(
            "topic steps {}-{}: at {} gained {}",
            start,
            end - 1,
            locations.into_iter().collect::<Vec<_>>().join(","),
            gained.into_iter().collect::<Vec<_>>().join(",")
        ));
        start = end;
    }
    LightStore { lines, topics }
}

pub enum NeighborStore {
    Note(NoteStore),
    Hier(HierStore),
    Light(LightStore),
}

/// Shared retrieval surface for the three neighbor baselines. All are
/// text-only and anchor-free, capped at the shared low-token budget.
pub fn neighbor_retrieve(
    store: &NeighborStore,
    question: &str,
    top_k: usize,
    budget: usize,
) -> EvidencePack {
    let mut candidates: Vec<(f64, usize, String)> = Vec::new();
    match store {
        NeighborStore::Note(note) => {
            let mut scored: Vec<(f64, usize)> = note
                .notes
                .iter()
                .enumerate()
                .map(|(i, (_, text, _))| (token_f1(question, text), i))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let chosen: Vec<usize> = scored.iter().take(top_k).map(|&(_, i)| i).collect();
            let mut with_links: BTreeSet<usize> = chosen.iter().copied().collect();
            for i in &chosen {
                with_links.extend(note.links.get(i).into_iter().flatten().copied());
            }
            for i in with_links {
                let (step, text, _) = &note.notes[i];
                candidates.push((token_f1(question, text), *step, text.clone()));
            }
        }
        NeighborStore::Hier(hier) => {
            let mut scored: Vec<(f64, usize)> = hier
                .segments
                .iter()
                .enumerate()
                .map(|(i, (_, _, summary))| (token_f1(question, summary), i))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, seg_idx) in scored.into_iter().take(2) {
                let (start, end, _) = hier.segments[seg_idx];
                for step in start..end {
                    let text = hier.step_lines[step].clone();
                    candidates.push((token_f1(question, &text), step, text));
                }
            }
        }
        NeighborStore::Light(light) => {
            let mut scored: Vec<(f64, usize)> = light
                .lines
                .iter()
                .enumerate()
                .map(|(i, (_, text))| (token_f1(question, text), i))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, i) in scored.into_iter().take(top_k) {
                let (step, text) = &light.lines[i];
                candidates.push((token_f1(question, text), *step, text.clone()));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<(usize, String)> = Vec::new();
    let mut cost = 0usize;
    for (_, step, text) in candidates {
        let c = token_count(&text);
        if cost + c <= budget {
            cost += c;
            kept.push((step, text));
        }
    }
    let mut pack = EvidencePack::from_lines(kept);
    pack.budget = budget;
    pack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{simulate_gridworld, GridWorldConfig};

    fn sample() -> Trajectory {
        simulate_gridworld(&GridWorldConfig {
            step_budget: 40,
            seed: 9,
            ..GridWorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn no_memory_is_final_observation() {
        let t = sample();
        let pack = no_memory_interface(&t);
        assert_eq!(pack.lines.len(), 1);
        assert_eq!(pack.lines[0].0, 39);
        assert_eq!(pack.token_cost, token_count(&pack.lines[0].1));
    }

    #[test]
    fn chunks_cover_all_steps() {
        let t = sample();
        let idx = build_chunk_index(&t, 3, 3);
        let covered: BTreeSet<usize> = idx
            .chunks
            .iter()
            .flat_map(|(s, e, _)| (*s..*e).collect::<Vec<_>>())
            .collect();
        assert_eq!(covered.len(), t.steps.len());
    }

    #[test]
    fn vanilla_verbatim_chunk_ranks_first() {
        let t = sample();
        let idx = build_chunk_index(&t, 3, 3);
        let question = idx.chunks[4].2.clone();
        let pack = vanilla_rag_retrieve(&idx, &t, &question, 1);
        let (start, end, _) = idx.chunks[4];
        let steps: Vec<usize> = pack.lines.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps, (start..end).collect::<Vec<_>>());
    }

    #[test]
    fn graph_next_edges_form_path() {
        let t = sample();
        let g = graph_build(&t);
        let next_edges: Vec<(&str, &str)> = g
            .edges
            .iter()
            .filter(|(_, p, _)| p == "next")
            .map(|(a, _, b)| (g.nodes[*a].1.as_str(), g.nodes[*b].1.as_str()))
            .collect();
        assert_eq!(next_edges.len(), t.steps.len() - 1);
        for (i, (a, b)) in next_edges.iter().enumerate() {
            assert_eq!(*a, format!("step_{i}"));
            assert_eq!(*b, format!("step_{}", i + 1));
        }
    }

    #[test]
    fn graph_hops_zero_emits_only_seeded_steps() {
        let t = sample();
        let g = graph_build(&t);
        let pack = graph_retrieve(&g, "at step 5", 0);
        let steps: Vec<usize> = pack.lines.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps, vec![5]);
    }

    #[test]
    fn graph_location_incidence() {
        let t = sample();
        let g = graph_build(&t);
        let loc = t.steps[10].location.clone();
        let at_loc: Vec<usize> = t
            .steps
            .iter()
            .filter(|s| s.location == loc)
            .map(|s| s.index)
            .collect();
        let pack = graph_retrieve(&g, &format!("where {loc}"), 2);
        let steps: BTreeSet<usize> = pack.lines.iter().map(|(s, _)| *s).collect();
        for s in at_loc {
            assert!(steps.contains(&s), "missing step {s} at {loc}");
        }
    }

    #[test]
    fn rtk_dedups_and_respects_budget() {
        let mut raw = EvidencePack::empty(usize::MAX);
        raw.lines = vec![
            (0, "step=0 action=collect loc=a".to_string()),
            (1, "step=0 action=collect loc=a".to_string()),
            (2, "step=2 action=move loc=b wood".to_string()),
        ];
        let pack = rtk_compress(&raw, "wood", 1000);
        assert_eq!(pack.lines.len(), 2);
        let tight = rtk_compress(&raw, "wood", 10);
        assert!(tight.token_cost <= 10);
    }

    #[test]
    fn lightstore_lines_cheaper_than_notes() {
        let t = sample();
        let light = build_light_store(&t);
        let note = build_note_store(&t);
        for i in 0..t.steps.len() {
            assert!(token_count(&light.lines[i].1) <= token_count(&note.notes[i].1));
        }
    }

    #[test]
    fn neighbor_budget_is_enforced() {
        let t = sample();
        for store in [
            NeighborStore::Note(build_note_store(&t)),
            NeighborStore::Hier(build_hier_store(&t)),
            NeighborStore::Light(build_light_store(&t)),
        ] {
            let pack = neighbor_retrieve(&store, "where was the agent", 16, NEIGHBOR_BUDGET);
            assert!(pack.token_cost <= NEIGHBOR_BUDGET);
        }
    }
}
