//! Two-stage anchor-sensitive retrieval: a lexical candidate search over
//! serialized memory units, then anchor-aware expansion (seed injection)
//! and reranking by a linear score over text, anchor, and chain terms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::anchor::{AnchorTuple, Occurrence};
use crate::memory::{MemoryStore, MemoryUnit};

/// Event kinds treated as state transitions for seed injection: item gains,
/// unlocks, and location changes.
pub const TRANSITION_KINDS: &[&str] = &["gain_item", "unlock", "visit"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub top_k: usize,
    pub short_window: usize,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub seed_injection: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            top_k: 16,
            short_window: 4,
            lambda_a: 2.0,
            lambda_c: 1.0,
            seed_injection: true,
        }
    }
}

/// A candidate memory unit with its score decomposition and the admission
/// flags the evidence packer consumes.
#[derive(Debug, Clone)]
pub struct ScoredUnit {
    pub unit: MemoryUnit,
    pub s_text: f64,
    pub s_anchor: f64,
    pub s_chain: f64,
    pub total: f64,
    /// unit sits at a resolved anchor step (packer admission tier 1)
    pub anchor_step: bool,
    /// unit sits in the minimal offset/occurrence neighborhood (tier 2)
    pub neighborhood: bool,
    /// unit lies within the short window of some anchor step
    pub window_support: bool,
}

/// Lowercase alphanumeric runs; shared with the token accounting rule.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            current.push(c.to_ascii_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token-overlap F1 between two texts (multiset intersection).
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta = tokenize(a);
    let tb = tokenize(b);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &ta {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &tb {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / tb.len() as f64;
    let recall = overlap as f64 / ta.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Top-k units by lexical similarity to the question; ties broken by lower
/// step index.
pub fn text_candidates(store: &MemoryStore, question: &str, top_k: usize) -> Vec<ScoredUnit> {
    let mut scored: Vec<(f64, usize)> = store
        .units
        .iter()
        .map(|u| (token_f1(question, &u.render_line()), u.step))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(top_k)
        .map(|(s_text, step)| ScoredUnit {
            unit: store.units[step].clone(),
            s_text,
            s_anchor: 0.0,
            s_chain: 0.0,
            total: s_text,
            anchor_step: false,
            neighborhood: false,
            window_support: false,
        })
        .collect()
}

/// The k-th (or last) step carrying an event of `kind`, optionally filtered
/// by event object. `None` when there are fewer than k occurrences.
pub fn resolve_occurrence(
    store: &MemoryStore,
    kind: &str,
    object: Option<&str>,
    occurrence: Occurrence,
) -> Option<usize> {
    let steps = store.event_steps(kind, object);
    match occurrence {
        Occurrence::Nth(n) => steps.get(n as usize - 1).copied(),
        Occurrence::Last => steps.last().copied(),
    }
}

/// Resolved anchor structure shared by the reranker and the packer.
#[derive(Debug, Clone, Default)]
pub struct ResolvedAnchors {
    /// decisive steps named by the question (target step, k-th occurrence)
    pub exact_steps: BTreeSet<usize>,
    /// the evidence the answer cannot be derived without: occurrence
    /// certificates (all occurrences up to the k-th), the target step, and
    /// a resolved offset endpoint; these are the packer's anchor tier
    pub required_steps: BTreeSet<usize>,
    /// all anchor steps including state-transition seeds; windows expand
    /// around these
    pub anchor_steps: BTreeSet<usize>,
    /// minimal neighborhood supporting a resolved offset or occurrence,
    /// excluding the required steps themselves
    pub neighborhood: BTreeSet<usize>,
}

/// The steps certifying an occurrence selection: the first k occurrences
/// for `Nth(k)`, the final one for `Last`, every occurrence when no marker
/// is present (counting semantics).
fn occurrence_certificates(steps: &[usize], occurrence: Option<Occurrence>) -> Vec<usize> {
    match occurrence {
        Some(Occurrence::Nth(n)) => steps.iter().take(n as usize).copied().collect(),
        Some(Occurrence::Last) => steps.last().copied().into_iter().collect(),
        None => steps.to_vec(),
    }
}

pub fn resolve_anchors(
    store: &MemoryStore,
    anchors: &AnchorTuple,
    cfg: &RetrievalConfig,
) -> ResolvedAnchors {
    let len = store.units.len();
    let mut resolved = ResolvedAnchors::default();

    if let Some(step) = anchors.target_step {
        if step < len {
            resolved.exact_steps.insert(step);
            resolved.required_steps.insert(step);
        }
    }
    let mut primary: Option<usize> = anchors.target_step.filter(|&s| s < len);
    if let Some(kind) = &anchors.trigger_event {
        let steps = store.event_steps(kind, anchors.target_object.as_deref());
        if let Some(k) = anchors.occurrence {
            if let Some(step) =
                resolve_occurrence(store, kind, anchors.target_object.as_deref(), k)
            {
                resolved.exact_steps.insert(step);
                primary = primary.or(Some(step));
            }
        }
        resolved
            .required_steps
            .extend(occurrence_certificates(&steps, anchors.occurrence));
        // state-transition seeds: every step carrying the trigger event
        if TRANSITION_KINDS.contains(&kind.as_str()) {
            resolved.anchor_steps.extend(steps);
        }
    }
    if let Some(second) = &anchors.second_event {
        let steps = store.event_steps(&second.kind, second.object.as_deref());
        if let Some(k) = second.occurrence {
            if let Some(step) = resolve_occurrence(store, &second.kind, second.object.as_deref(), k)
            {
                resolved.exact_steps.insert(step);
            }
        }
        resolved
            .required_steps
            .extend(occurrence_certificates(&steps, second.occurrence));
    }

    let mut neighborhood = BTreeSet::new();
    if let Some(primary) = primary {
        match anchors.temporal_offset {
            Some(delta) => {
                let target = primary as i64 + delta;
                if target >= 0 && target < len as i64 {
                    // the offset endpoint is decisive evidence
                    resolved.required_steps.insert(target as usize);
                }
                let (lo, hi) = if delta >= 0 {
                    (primary as i64, target)
                } else {
                    (target, primary as i64)
                };
                for s in lo.max(0)..=hi.min(len as i64 - 1) {
                    neighborhood.insert(s as usize);
                }
            }
            None => {
                for s in primary.saturating_sub(1)..=(primary + 1).min(len.saturating_sub(1)) {
                    neighborhood.insert(s);
                }
            }
        }
    }
    resolved.anchor_steps.extend(resolved.required_steps.iter());
    resolved.neighborhood = neighborhood
        .difference(&resolved.required_steps)
        .copied()
        .collect();
    let _ = cfg;
    resolved
}

fn anchor_score(unit: &MemoryUnit, anchors: &AnchorTuple, resolved: &ResolvedAnchors) -> f64 {
    let mut score = 0.0;
    if let Some(object) = &anchors.target_object {
        let in_objects = unit.objects.contains(object)
            || unit.events.iter().any(|e| &e.object == object)
            || unit.inventory.contains_key(object);
        if in_objects {
            score += 1.0;
        }
        if &unit.location == object {
            score += 1.0;
        }
    }
    if let Some(kind) = &anchors.trigger_event {
        if unit.events.iter().any(|e| &e.kind == kind) {
            score += 1.0;
        }
    }
    if resolved.exact_steps.contains(&unit.step) {
        score += 1.0;
    }
    score
}

fn near_anchor(step: usize, resolved: &ResolvedAnchors, window: usize) -> bool {
    resolved
        .anchor_steps
        .iter()
        .any(|&a| step.abs_diff(a) <= window)
}

/// Full anchor-aware retrieval: lexical candidates, seed injection, window
/// expansion, and reranking by `s_text + lambda_a*s_anchor + lambda_c*s_chain`.
/// Final ties break anchor-bearing first, then window support, then lower
/// step index.
pub fn retrieve(
    store: &MemoryStore,
    anchors: &AnchorTuple,
    question: &str,
    cfg: &RetrievalConfig,
) -> Vec<ScoredUnit> {
    let resolved = resolve_anchors(store, anchors, cfg);
    let len = store.units.len();

    let mut candidate_steps: BTreeSet<usize> = BTreeSet::new();
    let lexical = text_candidates(store, question, cfg.top_k);
    let mut s_text_by_step: BTreeMap<usize, f64> = BTreeMap::new();
    for c in &lexical {
        candidate_steps.insert(c.unit.step);
        s_text_by_step.insert(c.unit.step, c.s_text);
    }

    if cfg.seed_injection {
        for &a in &resolved.anchor_steps {
            candidate_steps.insert(a);
            for s in a.saturating_sub(cfg.short_window)..=(a + cfg.short_window).min(len - 1) {
                candidate_steps.insert(s);
            }
        }
        candidate_steps.extend(resolved.neighborhood.iter());
    }

    let mut units: Vec<ScoredUnit> = candidate_steps
        .into_iter()
        .filter_map(|step| store.unit_at(step))
        .map(|unit| {
            let s_text = s_text_by_step
                .get(&unit.step)
                .copied()
                .unwrap_or_else(|| token_f1(question, &unit.render_line()));
            let s_anchor = if cfg.seed_injection {
                anchor_score(unit, anchors, &resolved)
            } else {
                // without seeds the anchor term still scores field matches,
                // but no exact-step knowledge exists
                let mut tuple_only = resolved.clone();
                tuple_only.exact_steps.clear();
                anchor_score(unit, anchors, &tuple_only)
            };
            let window_support =
                cfg.seed_injection && near_anchor(unit.step, &resolved, cfg.short_window);
            ScoredUnit {
                anchor_step: cfg.seed_injection && resolved.required_steps.contains(&unit.step),
                neighborhood: cfg.seed_injection && resolved.neighborhood.contains(&unit.step),
                window_support,
                s_text,
                s_anchor,
                s_chain: if window_support { 1.0 } else { 0.0 },
                total: 0.0,
                unit: unit.clone(),
            }
        })
        .collect();

    for u in &mut units {
        u.total = u.s_text + cfg.lambda_a * u.s_anchor + cfg.lambda_c * u.s_chain;
    }
    sort_ranked(&mut units);

    // chain novelty: a unit earns +1 when it supplies a state fact absent
    // from every higher-ranked unit; only meaningful once an anchor chain
    // exists
    if cfg.seed_injection && !resolved.anchor_steps.is_empty() {
        let mut seen_facts: BTreeSet<String> = BTreeSet::new();
        for u in &mut units {
            if u.unit.state_facts.iter().any(|f| !seen_facts.contains(f)) {
                u.s_chain += 1.0;
                u.total += cfg.lambda_c;
            }
            seen_facts.extend(u.unit.state_facts.iter().cloned());
        }
        sort_ranked(&mut units);
    }
    units
}

fn sort_ranked(units: &mut [ScoredUnit]) {
    units.sort_by(|a, b| {
        b.total
            .total_cmp(&a.total)
            .then_with(|| b.anchor_step.cmp(&a.anchor_step))
            .then_with(|| b.window_support.cmp(&a.window_support))
            .then_with(|| a.unit.step.cmp(&b.unit.step))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::QueriedField;
    use crate::envs::{simulate_gridworld, GridWorldConfig};
    use crate::memory::{write_trajectory, WriteMode};

    fn store() -> MemoryStore {
        let t = simulate_gridworld(&GridWorldConfig {
            step_budget: 40,
            seed: 3,
            ..GridWorldConfig::default()
        })
        .unwrap();
        write_trajectory(&t, WriteMode::Full)
    }

    fn empty_tuple() -> AnchorTuple {
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

    #[test]
    fn zero_overlap_keeps_step_order() {
        let store = store();
        let out = text_candidates(&store, "zzz qqq xxx", 5);
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|u| u.s_text == 0.0));
        let steps: Vec<usize> = out.iter().map(|u| u.unit.step).collect();
        assert_eq!(steps, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn self_similarity_ranks_first() {
        let store = store();
        let line = store.units[7].render_line();
        let out = text_candidates(&store, &line, 3);
        assert_eq!(out[0].unit.step, 7);
        assert!(out[0].s_text > 0.99);
    }

    #[test]
    fn occurrence_resolution() {
        let store = store();
        let steps = store.event_steps("gain_item", None);
        assert!(steps.len() >= 2, "need gains in fixture");
        assert_eq!(
            resolve_occurrence(&store, "gain_item", None, Occurrence::Nth(2)),
            Some(steps[1])
        );
        assert_eq!(
            resolve_occurrence(&store, "gain_item", None, Occurrence::Last),
            steps.last().copied()
        );
        assert_eq!(
            resolve_occurrence(&store, "unlock", None, Occurrence::Nth(1)),
            None
        );
    }

    #[test]
    fn empty_anchors_without_seeds_reduces_to_lexical() {
        let store = store();
        let cfg = RetrievalConfig {
            seed_injection: false,
            ..RetrievalConfig::default()
        };
        let lexical: Vec<usize> = text_candidates(&store, "collect wood", cfg.top_k)
            .iter()
            .map(|u| u.unit.step)
            .collect();
        let ranked: Vec<usize> = retrieve(&store, &empty_tuple(), "collect wood", &cfg)
            .iter()
            .map(|u| u.unit.step)
            .collect();
        assert_eq!(lexical, ranked);
    }

    #[test]
    fn window_expansion_includes_neighbors() {
        let store = store();
        let gain = store.event_steps("gain_item", None)[0];
        let mut anchors = empty_tuple();
        anchors.trigger_event = Some("gain_item".to_string());
        anchors.occurrence = Some(Occurrence::Nth(1));
        anchors.queried_field = QueriedField::Step;
        let cfg = RetrievalConfig::default();
        let ranked = retrieve(&store, &anchors, "zzz", &cfg);
        let steps: BTreeSet<usize> = ranked.iter().map(|u| u.unit.step).collect();
        for s in gain.saturating_sub(cfg.short_window)..=(gain + cfg.short_window).min(39) {
            assert!(steps.contains(&s), "missing window step {s}");
        }
        // seed guarantee: the anchor unit itself is present
        assert!(ranked.iter().any(|u| u.unit.step == gain && u.anchor_step));
    }

    #[test]
    fn no_seed_drops_anchor_guarantee() {
        let store = store();
        let gain = store.event_steps("gain_item", None)[0];
        let mut anchors = empty_tuple();
        anchors.trigger_event = Some("gain_item".to_string());
        anchors.occurrence = Some(Occurrence::Nth(1));
        let cfg = RetrievalConfig {
            seed_injection: false,
            top_k: 3,
            ..RetrievalConfig::default()
        };
        let ranked = retrieve(&store, &anchors, "zzz qqq", &cfg);
        // with zero lexical signal and no seeds, the anchor unit appears
        // only if it happens to be in the lexical top-k (steps 0..3 here)
        assert!(ranked.iter().all(|u| !u.anchor_step));
        if gain > 3 {
            assert!(ranked.iter().all(|u| u.unit.step != gain));
        }
    }
}
