//! Exact-match scoring, token accounting, family breakdowns, bootstrap
//! statistics, and the accuracy/efficiency frontier report.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer::Answer;
use crate::error::EngineError;
use crate::pack::EvidencePack;
use crate::qa::QAItem;

/// Lowercase, trim, collapse internal whitespace, strip edge punctuation,
/// and canonicalize decimal integers. Idempotent.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed: Vec<&str> = lowered.split_whitespace().collect();
    let joined = collapsed.join(" ");
    let trimmed = joined.trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != ' ');
    let trimmed = trimmed.trim();
    if !trimmed.is_empty() && trimmed.chars().all(|c| c.is_ascii_digit()) {
        let canon = trimmed.trim_start_matches('0');
        return if canon.is_empty() {
            "0".to_string()
        } else {
            canon.to_string()
        };
    }
    trimmed.to_string()
}

pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

/// One scored question: everything the paired bootstrap and the frozen
/// determinism check need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub qid: String,
    pub family: String,
    pub pred: String,
    pub gold: String,
    pub correct: u8,
    pub tokens: usize,
    pub evidence_steps: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub protocol: String,
    pub em: f64,
    pub avg_tokens: f64,
    pub per_family: BTreeMap<String, (f64, usize)>,
    pub n_questions: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub config_hash: String,
}

/// Scores a run. The `episode_id` on each tuple is the episode the
/// evidence was actually built from; a mismatch against the question's
/// episode is a harness bug and surfaces as an error.
pub fn score_run(
    answers: &[(QAItem, Answer, EvidencePack, String)],
    method: &str,
    protocol: &str,
    config_hash: &str,
    bootstrap_seed: u64,
) -> Result<(RunReport, Vec<QuestionRecord>), EngineError> {
    if answers.is_empty() {
        return Err(EngineError::InvalidInput("empty answer set".to_string()));
    }
    let mut records = Vec::with_capacity(answers.len());
    for (item, answer, pack, source_episode) in answers {
        if &item.episode_id != source_episode {
            return Err(EngineError::DatasetMismatch(format!(
                "question {} belongs to {}, evidence came from {}",
                item.qid, item.episode_id, source_episode
            )));
        }
        records.push(QuestionRecord {
            qid: item.qid.clone(),
            family: item.family.clone(),
            pred: answer.text.clone(),
            gold: item.gold_answer.clone(),
            correct: exact_match(&answer.text, &item.gold_answer),
            tokens: pack.token_cost,
            evidence_steps: pack.lines.iter().map(|(s, _)| *s).collect(),
        });
    }

    let n = records.len();
    let correct: Vec<u8> = records.iter().map(|r| r.correct).collect();
    let em = correct.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
    let avg_tokens = records.iter().map(|r| r.tokens as f64).sum::<f64>() / n as f64;

    let mut per_family: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut family_groups: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for r in &records {
        family_groups.entry(&r.family).or_default().push(r.correct);
    }
    for (family, results) in family_groups {
        let fam_em = results.iter().map(|&c| c as f64).sum::<f64>() / results.len() as f64;
        per_family.insert(family.to_string(), (fam_em, results.len()));
    }

    let (_, ci_low, ci_high) = bootstrap_ci(&correct, 2000, bootstrap_seed);
    Ok((
        RunReport {
            method: method.to_string(),
            protocol: protocol.to_string(),
            em,
            avg_tokens,
            per_family,
            n_questions: n,
            ci_low,
            ci_high,
            config_hash: config_hash.to_string(),
        },
        records,
    ))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // nearest-rank on the sorted resample means
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Percentile bootstrap over a 0/1 correctness vector. Deterministic for
/// equal seeds; each resample draws from its own derived stream.
pub fn bootstrap_ci(correctness: &[u8], resamples: usize, seed: u64) -> (f64, f64, f64) {
    assert!(!correctness.is_empty(), "bootstrap over empty data");
    let n = correctness.len();
    let mut means = Vec::with_capacity(resamples);
    for b in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
        let mut total = 0u64;
        for _ in 0..n {
            total += correctness[rng.gen_range(0..n)] as u64;
        }
        means.push(total as f64 / n as f64);
    }
    let center = mean(&means);
    means.sort_by(|a, b| a.total_cmp(b));
    (center, percentile(&means, 0.025), percentile(&means, 0.975))
}

/// Paired bootstrap of two aligned correctness vectors: resamples question
/// indices jointly and reports the percentile interval of the mean
/// difference a - b.
pub fn paired_bootstrap(
    a: &[u8],
    b: &[u8],
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64, f64), EngineError> {
    if a.len() != b.len() {
        return Err(EngineError::InvalidInput(format!(
            "paired bootstrap needs aligned lists ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(EngineError::InvalidInput("empty correctness lists".to_string()));
    }
    let n = a.len();
    let mut diffs = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut total = 0i64;
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            total += a[i] as i64 - b[i] as i64;
        }
        diffs.push(total as f64 / n as f64);
    }
    let center = mean(&diffs);
    diffs.sort_by(|x, y| x.total_cmp(y));
    Ok((
        center,
        percentile(&diffs, 0.025),
        percentile(&diffs, 0.975),
    ))
}

/// Frontier view over run reports: EM versus average evidence tokens, with
/// Pareto-dominant entries flagged. Dominance is strict on both axes.
pub fn frontier_report(reports: &[RunReport]) -> (String, serde_json::Value) {
    let dominant: Vec<bool> = reports
        .iter()
        .map(|r| {
            !reports
                .iter()
                .any(|o| o.em > r.em && o.avg_tokens < r.avg_tokens)
        })
        .collect();
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        reports[b]
            .em
            .total_cmp(&reports[a].em)
            .then(reports[a].avg_tokens.total_cmp(&reports[b].avg_tokens))
    });

    let mut table = String::new();
    table.push_str(&format!(
        "{:<22} {:>8} {:>12} {:>8} {:>8}\n",
        "Method", "EM", "Avg. Tokens", "n", "Pareto"
    ));
    for &i in &order {
        let r = &reports[i];
        table.push_str(&format!(
            "{:<22} {:>8.4} {:>12.2} {:>8} {:>8}\n",
            r.method,
            r.em,
            r.avg_tokens,
            r.n_questions,
            if dominant[i] { "yes" } else { "no" }
        ));
    }
    let json = serde_json::json!(order
        .iter()
        .map(|&i| {
            serde_json::json!({
                "method": reports[i].method,
                "protocol": reports[i].protocol,
                "em": reports[i].em,
                "avg_tokens": reports[i].avg_tokens,
                "n_questions": reports[i].n_questions,
                "pareto": dominant[i],
            })
        })
        .collect::<Vec<_>>());
    (table, json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_answer("  Wood "), "wood");
        assert_eq!(normalize_answer("09"), "9");
        assert_eq!(normalize_answer("0"), "0");
        assert_eq!(normalize_answer("00"), "0");
        assert_eq!(normalize_answer("go  Hall"), "go hall");
        assert_eq!(normalize_answer("'wood'"), "wood");
    }

    #[test]
    fn exact_match_basics() {
        assert_eq!(exact_match("wood", "wood"), 1);
        assert_eq!(exact_match("wood", "stone"), 0);
        assert_eq!(exact_match(" WOOD ", "wood"), 1);
    }

    #[test]
    fn bootstrap_degenerate_inputs() {
        assert_eq!(bootstrap_ci(&[1, 1, 1], 200, 7), (1.0, 1.0, 1.0));
        assert_eq!(bootstrap_ci(&[0, 0, 0], 200, 7), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let data: Vec<u8> = (0..100).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(bootstrap_ci(&data, 500, 42), bootstrap_ci(&data, 500, 42));
        assert_ne!(bootstrap_ci(&data, 500, 42), bootstrap_ci(&data, 500, 43));
    }

    #[test]
    fn paired_identical_runs_are_zero() {
        let a: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let out = paired_bootstrap(&a, &a, 300, 5).unwrap();
        assert_eq!(out, (0.0, 0.0, 0.0));
    }

    #[test]
    fn paired_rejects_mismatched_lengths() {
        assert!(paired_bootstrap(&[1], &[1, 0], 10, 1).is_err());
    }

    #[test]
    fn frontier_flags_dominated() {
        let mk = |method: &str, em: f64, tokens: f64| RunReport {
            method: method.to_string(),
            protocol: "current".to_string(),
            em,
            avg_tokens: tokens,
            per_family: BTreeMap::new(),
            n_questions: 10,
            ci_low: em,
            ci_high: em,
            config_hash: String::new(),
        };
        let reports = vec![mk("good", 0.9, 100.0), mk("bad", 0.5, 500.0)];
        let (_, json) = frontier_report(&reports);
        assert_eq!(json[0]["method"], "good");
        assert_eq!(json[0]["pareto"], true);
        assert_eq!(json[1]["pareto"], false);
    }
}
