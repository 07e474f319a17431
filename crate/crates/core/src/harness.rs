//! Orchestration: run configs with closed registries, dataset persistence,
//! end-to-end frozen evaluation runs, and the ablation sweep.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::answer::{answer_current, answer_generic, compile_program, execute_program, Answer, Protocol};
use crate::anchor::{extract_anchors, AnchorVocab};
use crate::baselines::{
    build_chunk_index, build_hier_store, build_light_store, build_note_store,
    full_history_interface, graph_build, graph_retrieve, neighbor_retrieve, no_memory_interface,
    rtk_compress, summarize_then_answer_interface, vanilla_rag_retrieve, ChunkIndex,
    NeighborStore, TrajGraph,
};
use crate::error::EngineError;
use crate::eval::{score_run, QuestionRecord, RunReport};
use crate::memory::{write_trajectory, MemoryStore, WriteMode};
use crate::pack::{no_compress_interface, pack_evidence, EvidencePack, PackObjective};
use crate::qa::QAItem;
use crate::retrieval::{retrieve, RetrievalConfig};
use crate::traj::{validate_trajectory, Trajectory};

pub const METHODS: &[&str] = &[
    "no_memory",
    "vanilla_rag",
    "graph_noreader",
    "full_history",
    "summarize",
    "s3mem",
    "amem_like",
    "memoryos_like",
    "lightmem_like",
];
pub const PROTOCOLS: &[&str] = &["current", "generic", "gold_executor"];
pub const WRITE_MODES: &[&str] = &["full", "event_only", "object_only", "plain_chunk"];

pub const DEFAULT_CHUNK_SIZE: usize = 3;
pub const DEFAULT_CHUNK_STRIDE: usize = 3;
pub const DEFAULT_GRAPH_HOPS: usize = 2;
pub const DEFAULT_BUDGET: usize = 192;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    /// inclusive seed range, e.g. "1..24"
    pub seeds: String,
    pub method: String,
    pub protocol: String,
    #[serde(default = "default_write_mode")]
    pub write_mode: String,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub rtk: bool,
    /// the no-compression ablation bypasses the packer
    #[serde(default)]
    pub no_compress: bool,
    pub traj_file: PathBuf,
    pub questions_file: PathBuf,
    pub output_dir: PathBuf,
}

fn default_write_mode() -> String {
    "full".to_string()
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

pub fn parse_seed_range(text: &str) -> Result<(u64, u64), EngineError> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| EngineError::InvalidInput(format!("bad seed range '{text}'")))?;
    let lo: u64 = lo
        .trim()
        .parse()
        .map_err(|_| EngineError::InvalidInput(format!("bad seed range '{text}'")))?;
    let hi: u64 = hi
        .trim()
        .parse()
        .map_err(|_| EngineError::InvalidInput(format!("bad seed range '{text}'")))?;
    if lo > hi {
        return Err(EngineError::InvalidInput(format!(
            "empty seed range '{text}'"
        )));
    }
    Ok((lo, hi))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !METHODS.contains(&self.method.as_str()) {
            return Err(EngineError::InvalidInput(format!(
                "unknown method '{}' (expected one of {METHODS:?})",
                self.method
            )));
        }
        if !PROTOCOLS.contains(&self.protocol.as_str()) {
            return Err(EngineError::InvalidInput(format!(
                "unknown protocol '{}' (expected one of {PROTOCOLS:?})",
                self.protocol
            )));
        }
        if !WRITE_MODES.contains(&self.write_mode.as_str()) {
            return Err(EngineError::InvalidInput(format!(
                "unknown write mode '{}' (expected one of {WRITE_MODES:?})",
                self.write_mode
            )));
        }
        if self.budget == 0 {
            return Err(EngineError::InvalidInput("budget must be >= 1".to_string()));
        }
        parse_seed_range(&self.seeds)?;
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_digest(&hasher.finalize())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, EngineError> {
    let data = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(hex_digest(&hasher.finalize()))
}

// --- dataset persistence -------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EngineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = fs::File::create(path)?;
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EngineError> {
    if !path.exists() {
        return Err(EngineError::MissingFile(path.display().to_string()));
    }
    let file = fs::File::open(path)?;
    let mut items = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok(items)
}

// --- per-episode method state --------------------------------------------

enum MethodState {
    S3Mem(Box<MemoryStore>),
    Vanilla(ChunkIndex),
    Graph(Box<TrajGraph>),
    NoMemory,
    FullHistory,
    Summarize,
    Neighbor(NeighborStore),
}

fn build_method_state(method: &str, t: &Trajectory, write_mode: WriteMode) -> MethodState {
    match method {
        "s3mem" => MethodState::S3Mem(Box::new(write_trajectory(t, write_mode))),
        "vanilla_rag" => {
            MethodState::Vanilla(build_chunk_index(t, DEFAULT_CHUNK_SIZE, DEFAULT_CHUNK_STRIDE))
        }
        "graph_noreader" => MethodState::Graph(Box::new(graph_build(t))),
        "no_memory" => MethodState::NoMemory,
        "full_history" => MethodState::FullHistory,
        "summarize" => MethodState::Summarize,
        "amem_like" => MethodState::Neighbor(NeighborStore::Note(build_note_store(t))),
        "memoryos_like" => MethodState::Neighbor(NeighborStore::Hier(build_hier_store(t))),
        "lightmem_like" => MethodState::Neighbor(NeighborStore::Light(build_light_store(t))),
        _ => unreachable!("validated method"),
    }
}

/// Evaluates one loaded dataset under a frozen config. Pure given its
/// inputs; the file-level entry point wraps this.
pub fn eval_dataset(
    cfg: &RunConfig,
    trajectories: &[Trajectory],
    questions: &[QAItem],
) -> Result<(RunReport, Vec<QuestionRecord>), EngineError> {
    cfg.validate()?;
    let write_mode = WriteMode::parse(&cfg.write_mode).expect("validated write mode");
    let protocol = Protocol::parse(&cfg.protocol).expect("validated protocol");
    let objective = PackObjective::default();

    let mut by_episode: BTreeMap<&str, &Trajectory> = BTreeMap::new();
    for t in trajectories {
        if let crate::traj::Validation::Violations(v) = validate_trajectory(t) {
            return Err(EngineError::InvalidInput(format!(
                "invalid trajectory {}: {}",
                t.episode_id,
                v.join("; ")
            )));
        }
        by_episode.insert(&t.episode_id, t);
    }

    let mut grouped: BTreeMap<&str, Vec<&QAItem>> = BTreeMap::new();
    for q in questions {
        grouped.entry(&q.episode_id).or_default().push(q);
    }

    let mut answers: Vec<(QAItem, Answer, EvidencePack, String)> = Vec::new();
    for (episode_id, items) in grouped {
        let t = by_episode.get(episode_id).ok_or_else(|| {
            EngineError::DatasetMismatch(format!(
                "questions reference unknown episode '{episode_id}'"
            ))
        })?;
        let vocab = AnchorVocab::from_trajectory(t);
        let state = build_method_state(&cfg.method, t, write_mode);
        for item in items {
            let anchors = extract_anchors(&item.question, &vocab);
            let mut pack = match &state {
                MethodState::S3Mem(store) => {
                    let ranked = retrieve(store, &anchors, &item.question, &cfg.retrieval);
                    if cfg.no_compress {
                        no_compress_interface(&ranked)
                    } else {
                        pack_evidence(&ranked, cfg.budget, &objective)
                    }
                }
                MethodState::Vanilla(idx) => {
                    // top_k counts units elsewhere; chunks hold several
                    // steps each, so scale it down to keep the snippet
                    // coverage in the usual plain-RAG regime
                    let chunk_top_k = (cfg.retrieval.top_k / DEFAULT_CHUNK_SIZE).max(1);
                    vanilla_rag_retrieve(idx, t, &item.question, chunk_top_k)
                }
                MethodState::Graph(graph) => {
                    graph_retrieve(graph, &item.question, DEFAULT_GRAPH_HOPS)
                }
                MethodState::NoMemory => no_memory_interface(t),
                MethodState::FullHistory => full_history_interface(t),
                MethodState::Summarize => summarize_then_answer_interface(t),
                MethodState::Neighbor(store) => {
                    neighbor_retrieve(store, &item.question, cfg.retrieval.top_k, cfg.budget)
                }
            };
            if cfg.rtk {
                pack = rtk_compress(&pack, &item.question, cfg.budget);
            }
            let answer = match protocol {
                Protocol::Current => answer_current(&pack, &anchors)?,
                Protocol::Generic => answer_generic(&pack, &item.question),
                Protocol::GoldExecutor => execute_program(&compile_program(&anchors), t)?,
            };
            answers.push(((*item).clone(), answer, pack, episode_id.to_string()));
        }
    }

    let hash = cfg.config_hash();
    // bootstrap seeding is part of the frozen config
    let bootstrap_seed = u64::from_str_radix(&hash[..8], 16).unwrap_or(0);
    score_run(&answers, &cfg.method, &cfg.protocol, &hash, bootstrap_seed)
}

/// Full run: loads the dataset files, checks the seed coverage, evaluates,
/// and writes per-question records plus the run report.
pub fn run_eval(cfg: &RunConfig) -> Result<(RunReport, Vec<QuestionRecord>), EngineError> {
    cfg.validate()?;
    let trajectories: Vec<Trajectory> = read_jsonl(&cfg.traj_file)?;
    let questions: Vec<QAItem> = read_jsonl(&cfg.questions_file)?;

    if matches!(cfg.env.as_str(), "gridworld" | "textadv") {
        let (lo, hi) = parse_seed_range(&cfg.seeds)?;
        for seed in lo..=hi {
            let episode = format!("{}_s{seed}", cfg.env);
            if !trajectories.iter().any(|t| t.episode_id == episode) {
                return Err(EngineError::MissingFile(format!(
                    "{}: no episode '{episode}'",
                    cfg.traj_file.display()
                )));
            }
        }
    }

    let (report, records) = eval_dataset(cfg, &trajectories, &questions)?;
    write_run_outputs(cfg, &report, &records)?;
    Ok((report, records))
}

/// Records and report land under the output dir, keyed by method, protocol,
/// and config hash so reruns of an equal config overwrite byte-identically.
pub fn write_run_outputs(
    cfg: &RunConfig,
    report: &RunReport,
    records: &[QuestionRecord],
) -> Result<(PathBuf, PathBuf), EngineError> {
    fs::create_dir_all(&cfg.output_dir)?;
    let stem = format!(
        "{}_{}_{}",
        cfg.method,
        cfg.protocol,
        &report.config_hash[..12]
    );
    let records_path = cfg.output_dir.join(format!("{stem}.records.jsonl"));
    write_jsonl(&records_path, records)?;
    let report_path = cfg.output_dir.join(format!("{stem}.report.json"));
    fs::write(&report_path, serde_json::to_string_pretty(report)?)?;
    Ok((records_path, report_path))
}

pub const ABLATION_VARIANTS: &[&str] =
    &["full", "no_seed", "no_compress", "top_k16", "budget96"];

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub variant: String,
    pub write_mode: String,
    pub report: RunReport,
}

pub fn ablation_config(base: &RunConfig, variant: &str, write_mode: &str) -> RunConfig {
    let mut cfg = base.clone();
    cfg.method = "s3mem".to_string();
    cfg.write_mode = write_mode.to_string();
    match variant {
        "no_seed" => cfg.retrieval.seed_injection = false,
        "no_compress" => cfg.no_compress = true,
        "top_k16" => cfg.retrieval.top_k = 16,
        "budget96" => cfg.budget = 96,
        _ => {}
    }
    cfg
}

/// Expands the base config into the component-ablation grid (retrieval and
/// packing variants crossed with every write mode) and runs each frozen
/// sub-run.
pub fn run_ablation_suite(base: &RunConfig) -> Result<Vec<AblationReport>, EngineError> {
    let trajectories: Vec<Trajectory> = read_jsonl(&base.traj_file)?;
    let questions: Vec<QAItem> = read_jsonl(&base.questions_file)?;
    let mut out = Vec::new();
    for variant in ABLATION_VARIANTS {
        for write_mode in WRITE_MODES {
            let cfg = ablation_config(base, variant, write_mode);
            let (report, records) = eval_dataset(&cfg, &trajectories, &questions)?;
            write_run_outputs(&cfg, &report, &records)?;
            out.push(AblationReport {
                variant: variant.to_string(),
                write_mode: write_mode.to_string(),
                report,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{simulate_gridworld, GridWorldConfig};
    use crate::qa::generate_questions;

    fn dataset() -> (Vec<Trajectory>, Vec<QAItem>) {
        let mut trajectories = Vec::new();
        let mut questions = Vec::new();
        for seed in 1..=2 {
            let t = simulate_gridworld(&GridWorldConfig {
                seed,
                step_budget: 40,
                ..GridWorldConfig::default()
            })
            .unwrap();
            questions.extend(generate_questions(&t, 2, 7));
            trajectories.push(t);
        }
        (trajectories, questions)
    }

    fn config(method: &str) -> RunConfig {
        RunConfig {
            env: "gridworld".to_string(),
            seeds: "1..2".to_string(),
            method: method.to_string(),
            protocol: "current".to_string(),
            write_mode: "full".to_string(),
            retrieval: RetrievalConfig::default(),
            budget: DEFAULT_BUDGET,
            rtk: false,
            no_compress: false,
            traj_file: PathBuf::from("unused"),
            questions_file: PathBuf::from("unused"),
            output_dir: PathBuf::from("unused"),
        }
    }

    #[test]
    fn registry_violations_rejected_before_work() {
        let mut cfg = config("s3mem");
        cfg.method = "best_method".to_string();
        assert!(cfg.validate().is_err());
        let mut cfg = config("s3mem");
        cfg.protocol = "oracle".to_string();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn no_memory_avg_tokens_is_final_line_cost() {
        let (trajectories, questions) = dataset();
        let cfg = config("no_memory");
        let (report, _) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
        let expected: f64 = trajectories
            .iter()
            .map(|t| {
                crate::pack::token_count(&crate::pack::plain_line(t.steps.last().unwrap())) as f64
            })
            .sum::<f64>()
            / trajectories.len() as f64;
        // every question in an episode sees the same single-line pack
        assert!((report.avg_tokens - expected).abs() < 1e-9);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let (trajectories, questions) = dataset();
        let cfg = config("s3mem");
        let (_, records_a) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
        let (_, records_b) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
        let a: Vec<String> = records_a
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        let b: Vec<String> = records_b
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_episode_is_dataset_mismatch() {
        let (trajectories, mut questions) = dataset();
        questions[0].episode_id = "gridworld_s999".to_string();
        let cfg = config("s3mem");
        let err = eval_dataset(&cfg, &trajectories, &questions).unwrap_err();
        assert!(err.to_string().contains("dataset mismatch"));
    }

    #[test]
    fn ablation_grid_size() {
        assert_eq!(ABLATION_VARIANTS.len() * WRITE_MODES.len(), 20);
        let base = config("s3mem");
        let cfg = ablation_config(&base, "budget96", "event_only");
        assert_eq!(cfg.budget, 96);
        assert_eq!(cfg.write_mode, "event_only");
        let cfg = ablation_config(&base, "no_seed", "full");
        assert!(!cfg.retrieval.seed_injection);
    }
}
