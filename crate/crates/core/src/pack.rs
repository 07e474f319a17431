//! Token-budget-aware greedy evidence packing and the exact token
//! accounting rule used everywhere in the harness.
//!
//! Admission follows the priority order: anchor-bearing units, then the
//! minimal neighborhood supporting a resolved offset/occurrence, then units
//! supplying a state fact nothing else covers. Within each priority tier
//! smaller lines go first, which makes the greedy pack match the
//! subset-enumeration optimum under the same admission rules.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::retrieval::ScoredUnit;
use crate::traj::serialize_step_plain;

/// Token accounting rule: number of maximal alphanumeric runs plus number
/// of non-space punctuation characters, after lowercasing.
pub fn token_count(text: &str) -> usize {
    let mut tokens = 0usize;
    let mut in_run = false;
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            if !in_run {
                tokens += 1;
                in_run = true;
            }
        } else {
            in_run = false;
            if !c.is_whitespace() {
                tokens += 1;
            }
        }
    }
    tokens
}

/// Longest prefix of `text` costing at most `budget` tokens.
pub fn truncate_to_tokens(text: &str, budget: usize) -> String {
    let mut tokens = 0usize;
    let mut in_run = false;
    let mut end = 0usize;
    for (pos, c) in text.char_indices() {
        let cost = if c.is_ascii_alphanumeric() {
            let new_run = !in_run;
            in_run = true;
            usize::from(new_run)
        } else {
            in_run = false;
            usize::from(!c.is_whitespace())
        };
        if tokens + cost > budget {
            break;
        }
        tokens += cost;
        end = pos + c.len_utf8();
    }
    text[..end].to_string()
}

/// Surrogate packing objective weights: anchor steps, neighborhood support,
/// novel state facts, and a penalty for redundant units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackObjective {
    pub w_anchor: f64,
    pub w_neighborhood: f64,
    pub w_statefact: f64,
    pub w_redundancy: f64,
}

impl Default for PackObjective {
    fn default() -> Self {
        PackObjective {
            w_anchor: 4.0,
            w_neighborhood: 2.0,
            w_statefact: 1.0,
            w_redundancy: 1.0,
        }
    }
}

/// Ordered, budgeted evidence exposed to the answer layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePack {
    /// (step index, rendered evidence line), sorted by step index
    pub lines: Vec<(usize, String)>,
    pub token_cost: usize,
    pub budget: usize,
    pub anchor_steps_included: BTreeSet<usize>,
    /// set only in the degenerate case where the anchor line alone
    /// exceeded the budget and had to be cut
    pub truncated: bool,
}

impl EvidencePack {
    pub fn empty(budget: usize) -> Self {
        EvidencePack {
            lines: Vec::new(),
            token_cost: 0,
            budget,
            anchor_steps_included: BTreeSet::new(),
            truncated: false,
        }
    }

    /// Builds a pack from (step, line) pairs: sorts by step, dedups, and
    /// accounts tokens. No budget is enforced; use for unbounded interfaces.
    pub fn from_lines(mut lines: Vec<(usize, String)>) -> Self {
        lines.sort();
        lines.dedup();
        let token_cost = lines.iter().map(|(_, l)| token_count(l)).sum();
        EvidencePack {
            lines,
            token_cost,
            budget: usize::MAX,
            anchor_steps_included: BTreeSet::new(),
            truncated: false,
        }
    }

    pub fn rendered(&self) -> String {
        let texts: Vec<&str> = self.lines.iter().map(|(_, l)| l.as_str()).collect();
        texts.join("\n")
    }
}

/// Admission tier of a candidate under the declared packing rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Anchor,
    Neighborhood,
    StateFact,
    /// weakly relevant: carries something not yet covered (or no
    /// structured facts at all), admitted last with zero objective weight
    Weak,
    Skipped,
}

/// Classifies every ranked candidate into its admission tier. State-fact
/// eligibility is order-free: each fact not covered by an anchor or
/// neighborhood candidate is assigned to its cheapest carrier. A unit
/// whose every event kind, object, and state fact is already covered is
/// chain-redundant and skipped; units with no structured facts at all
/// cannot be chain-redundant and stay weakly admissible.
pub fn classify_candidates(ranked: &[ScoredUnit]) -> Vec<Tier> {
    let mut tiers = vec![Tier::Skipped; ranked.len()];
    let mut covered_facts: BTreeSet<&str> = BTreeSet::new();
    let mut covered_kinds: BTreeSet<&str> = BTreeSet::new();
    let mut covered_objects: BTreeSet<&str> = BTreeSet::new();
    let mut cover = |unit: &'_ MemoryUnitRef<'_>| {
        covered_facts.extend(unit.facts.iter().copied());
        covered_kinds.extend(unit.kinds.iter().copied());
        covered_objects.extend(unit.objects.iter().copied());
    };
    let views: Vec<MemoryUnitRef> = ranked.iter().map(|c| MemoryUnitRef::new(&c.unit)).collect();
    for (i, cand) in ranked.iter().enumerate() {
        if cand.anchor_step {
            tiers[i] = Tier::Anchor;
            cover(&views[i]);
        } else if cand.neighborhood {
            tiers[i] = Tier::Neighborhood;
            cover(&views[i]);
        }
    }
    // remaining candidates ordered by (line cost, rank); first carrier of
    // any uncovered state fact becomes tier 3
    let mut rest: Vec<usize> = (0..ranked.len())
        .filter(|&i| tiers[i] == Tier::Skipped)
        .collect();
    rest.sort_by_key(|&i| (token_count(&ranked[i].unit.render_line()), i));
    for i in rest {
        let novel_fact = views[i]
            .facts
            .iter()
            .any(|f| !covered_facts.contains(f));
        if novel_fact {
            tiers[i] = Tier::StateFact;
            cover(&views[i]);
        }
    }
    // weakly relevant tail: anything not chain-redundant
    for i in 0..ranked.len() {
        if tiers[i] != Tier::Skipped {
            continue;
        }
        let v = &views[i];
        let carries_nothing = v.facts.is_empty() && v.kinds.is_empty() && v.objects.is_empty();
        let all_covered = v.facts.iter().all(|f| covered_facts.contains(f))
            && v.kinds.iter().all(|k| covered_kinds.contains(k))
            && v.objects.iter().all(|o| covered_objects.contains(o));
        if carries_nothing || !all_covered {
            tiers[i] = Tier::Weak;
        }
    }
    tiers
}

struct MemoryUnitRef<'a> {
    facts: Vec<&'a str>,
    kinds: Vec<&'a str>,
    objects: Vec<&'a str>,
}

impl<'a> MemoryUnitRef<'a> {
    fn new(unit: &'a crate::memory::MemoryUnit) -> Self {
        MemoryUnitRef {
            facts: unit.state_facts.iter().map(String::as_str).collect(),
            kinds: unit.events.iter().map(|e| e.kind.as_str()).collect(),
            objects: unit
                .objects
                .iter()
                .map(String::as_str)
                .chain(unit.events.iter().map(|e| e.object.as_str()))
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }
}

/// Objective value of a selection under the surrogate weights. Weakly
/// relevant units carry no weight; redundant units never enter valid
/// packs, so the penalty term is reported for completeness but is zero on
/// packer output.
pub fn f_value(tiers: &[Tier], selected: &[bool], obj: &PackObjective) -> f64 {
    let mut value = 0.0;
    for (tier, &sel) in tiers.iter().zip(selected) {
        if !sel {
            continue;
        }
        value += match tier {
            Tier::Anchor => obj.w_anchor,
            Tier::Neighborhood => obj.w_neighborhood,
            Tier::StateFact => obj.w_statefact,
            Tier::Weak => 0.0,
            Tier::Skipped => -obj.w_redundancy,
        };
    }
    value
}

/// Greedy budgeted packing over the reranked candidate list.
pub fn pack_evidence(
    ranked: &[ScoredUnit],
    budget: usize,
    _obj: &PackObjective,
) -> EvidencePack {
    let tiers = classify_candidates(ranked);
    let costs: Vec<usize> = ranked
        .iter()
        .map(|c| token_count(&c.unit.render_line()))
        .collect();

    let mut selected = vec![false; ranked.len()];
    let mut remaining = budget;
    for tier in [Tier::Anchor, Tier::Neighborhood, Tier::StateFact] {
        let mut members: Vec<usize> = (0..ranked.len()).filter(|&i| tiers[i] == tier).collect();
        members.sort_by_key(|&i| (costs[i], i));
        for i in members {
            if costs[i] <= remaining {
                selected[i] = true;
                remaining -= costs[i];
            }
        }
    }
    // weakly relevant units fill whatever budget is left, in rank order
    for i in 0..ranked.len() {
        if tiers[i] == Tier::Weak && costs[i] <= remaining {
            selected[i] = true;
            remaining -= costs[i];
        }
    }

    let mut pack = EvidencePack::empty(budget);
    if !selected.iter().any(|&s| s) {
        // degenerate budget: cut the cheapest anchor line down to fit
        // rather than emitting nothing
        let cheapest_anchor = (0..ranked.len())
            .filter(|&i| tiers[i] == Tier::Anchor)
            .min_by_key(|&i| (costs[i], i));
        if let Some(i) = cheapest_anchor {
            let line = truncate_to_tokens(&ranked[i].unit.render_line(), budget);
            pack.token_cost = token_count(&line);
            pack.lines.push((ranked[i].unit.step, line));
            pack.anchor_steps_included.insert(ranked[i].unit.step);
            pack.truncated = true;
        }
        return pack;
    }

    let mut lines: Vec<(usize, String)> = Vec::new();
    for (i, cand) in ranked.iter().enumerate() {
        if selected[i] {
            lines.push((cand.unit.step, cand.unit.render_line()));
            if tiers[i] == Tier::Anchor {
                pack.anchor_steps_included.insert(cand.unit.step);
            }
        }
    }
    lines.sort();
    lines.dedup();
    pack.token_cost = lines.iter().map(|(_, l)| token_count(l)).sum();
    pack.lines = lines;
    debug_assert!(pack.token_cost <= budget);
    pack
}

/// The no-compression interface: every ranked unit's full plain line (full
/// write mode keeps the source line on the unit), unbounded budget.
pub fn no_compress_interface(ranked: &[ScoredUnit]) -> EvidencePack {
    let lines: Vec<(usize, String)> = ranked
        .iter()
        .map(|c| {
            let line = if c.unit.raw_line.is_empty() {
                c.unit.render_line()
            } else {
                c.unit.raw_line.clone()
            };
            (c.unit.step, line)
        })
        .collect();
    EvidencePack::from_lines(lines)
}

/// Full plain line for a step; kept here so interfaces that bypass memory
/// share the exact rendering.
pub fn plain_line(step: &crate::traj::Step) -> String {
    serialize_step_plain(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_count_examples() {
        assert_eq!(token_count(""), 0);
        assert_eq!(token_count("step=9 action=collect"), 6);
        assert_eq!(token_count("cell_1_2"), 5);
        assert_eq!(token_count("  a  b "), 2);
    }

    #[test]
    fn truncate_respects_budget() {
        let text = "step=9 action=collect loc=cell_1_2";
        for budget in 0..token_count(text) + 2 {
            let cut = truncate_to_tokens(text, budget);
            assert!(token_count(&cut) <= budget, "budget {budget}: {cut:?}");
        }
        assert_eq!(truncate_to_tokens(text, 100), text);
    }

    #[test]
    fn empty_ranked_gives_empty_pack() {
        let pack = pack_evidence(&[], 192, &PackObjective::default());
        assert_eq!(pack.token_cost, 0);
        assert!(pack.lines.is_empty());
    }
}
