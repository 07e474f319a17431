// Temporary design probe: prints per-method EM/token numbers on a small
// benchmark. Removed once the acceptance suite lands.

use s3mem_core::envs::{simulate_gridworld, simulate_textadventure, GridWorldConfig, TextAdvConfig};
use s3mem_core::harness::{eval_dataset, RunConfig, DEFAULT_BUDGET, METHODS, WRITE_MODES};
use s3mem_core::qa::{generate_questions, QAItem};
use s3mem_core::retrieval::RetrievalConfig;
use s3mem_core::traj::Trajectory;
use std::path::PathBuf;

fn dataset(env: &str) -> (Vec<Trajectory>, Vec<QAItem>) {
    let mut trajectories = Vec::new();
    let mut questions = Vec::new();
    for seed in 1..=6 {
        let t = match env {
            "gridworld" => simulate_gridworld(&GridWorldConfig {
                seed,
                ..GridWorldConfig::default()
            })
            .unwrap(),
            _ => simulate_textadventure(&TextAdvConfig {
                seed,
                ..TextAdvConfig::default()
            })
            .unwrap(),
        };
        questions.extend(generate_questions(&t, 3, 7));
        trajectories.push(t);
    }
    (trajectories, questions)
}

fn config(env: &str, method: &str) -> RunConfig {
    RunConfig {
        env: env.to_string(),
        seeds: "1..6".to_string(),
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
#[ignore]
fn probe_methods() {
    for env in ["gridworld", "textadv"] {
        let (trajectories, questions) = dataset(env);
        println!("== {env}: {} questions", questions.len());
        for method in METHODS {
            let cfg = config(env, method);
            let (report, _) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
            println!(
                "  {:<16} em={:.4} tokens={:>9.1}",
                method, report.em, report.avg_tokens
            );
        }
        // gold executor ceiling
        let mut cfg = config(env, "s3mem");
        cfg.protocol = "gold_executor".to_string();
        let (report, _) = eval_dataset(&cfg, &dataset(env).0, &questions).unwrap();
        println!("  {:<16} em={:.4} (gold executor)", "s3mem", report.em);
        // generic floor
        let mut cfg = config(env, "s3mem");
        cfg.protocol = "generic".to_string();
        let (report, _) = eval_dataset(&cfg, &dataset(env).0, &questions).unwrap();
        println!("  {:<16} em={:.4} (generic)", "s3mem", report.em);
    }
}

#[test]
#[ignore]
fn probe_write_modes() {
    for env in ["gridworld", "textadv"] {
        let (trajectories, questions) = dataset(env);
        println!("== {env} write modes");
        for mode in WRITE_MODES {
            let mut cfg = config(env, "s3mem");
            cfg.write_mode = mode.to_string();
            let (report, _) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
            println!("  {:<12} em={:.4}", mode, report.em);
        }
    }
}

#[test]
#[ignore]
fn probe_per_family() {
    let (trajectories, questions) = dataset("gridworld");
    let cfg = config("gridworld", "s3mem");
    let (report, records) = eval_dataset(&cfg, &trajectories, &questions).unwrap();
    println!("s3mem overall em={:.4}", report.em);
    for (family, (em, n)) in &report.per_family {
        println!("  {:<18} em={:.4} (n={})", family, em, n);
    }
    // sample some misses
    let mut shown = 0;
    for r in &records {
        if r.correct == 0 && shown < 15 {
            let q = questions.iter().find(|q| q.qid == r.qid).unwrap();
            println!("MISS [{:<14}] {} -> pred='{}' gold='{}'", r.family, q.question, r.pred, r.gold);
            shown += 1;
        }
    }
}
