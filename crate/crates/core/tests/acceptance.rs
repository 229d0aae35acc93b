//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the default test harness so every criterion always reports,
//! and the process exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use selfbias::calibrate::QuantileMap;
use selfbias::pipeline::{
    run_best_of_k, run_external_feedback_refine, run_self_refine, RunSettings, TaskKind,
    TaskPayload, TaskSpec, Trajectory, TrueScorer,
};
use selfbias::providers::{
    derive_seed, CompletionRequest, PromptRole, PromptTemplate, Provider, ScriptedProvider,
    TemplateSet,
};
use selfbias::scorers::{
    coverage_score, missing_concepts, mqm_score, parse_mqm_feedback, MqmAnnotation, SelfScorer,
    Severity,
};
use selfbias::stats::{bias, distance_skewness, per_iteration_stats, ScorePair};
use selfbias::Result;

// ---------------------------------------------------------------- helpers

/// Brute-force double-loop distance skewness: the independent oracle.
fn dskew_oracle(x: &[f64], gamma: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for a in x {
        for b in x {
            num += (a - b).abs();
            den += (a + b - 2.0 * gamma).abs();
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (1.0 - num / den).clamp(0.0, 1.0)
    }
}

struct FnProvider<F: Fn(&CompletionRequest) -> String + Send + Sync>(F, &'static str);

impl<F: Fn(&CompletionRequest) -> String + Send + Sync> Provider for FnProvider<F> {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        Ok(self.0(request))
    }
    fn tag(&self) -> String {
        self.1.to_string()
    }
}

struct ConstTrue(f64);

impl TrueScorer for ConstTrue {
    fn score(&self, _task: &TaskSpec, _candidate: &str, _key: u32) -> Result<f64> {
        Ok(self.0)
    }
}

fn translation_task(id: String) -> TaskSpec {
    TaskSpec {
        payload: TaskPayload::Translation {
            source: format!("source {id}"),
            reference: format!("reference {id}"),
            pair: "yor-en".into(),
        },
        id,
    }
}

fn assert_budget(start: Instant, budget: Duration, label: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "{label} took {elapsed:?}, budget {budget:?}"
    );
}

// --------------------------------------------------------------- criteria

/// dskew matches the brute-force oracle to 1e-12; bias equals the difference
/// of means to 1e-12.
fn c1_statistics_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let gamma = rng.gen_range(-5.0..5.0);
        let fast = distance_skewness(&x, gamma).unwrap();
        let slow = dskew_oracle(&x, gamma);
        assert!((fast - slow).abs() <= 1e-12, "dskew {fast} vs oracle {slow}");
    }
    for _ in 0..1000 {
        let n = rng.gen_range(1..=100);
        let pairs: Vec<ScorePair> = (0..n)
            .map(|i| {
                ScorePair::new(
                    format!("s{i}"),
                    0,
                    rng.gen_range(-25.0..0.0),
                    rng.gen_range(-25.0..0.0),
                )
            })
            .collect();
        let b = bias(&pairs).unwrap();
        let mean_self: f64 = pairs.iter().map(|p| p.self_score).sum::<f64>() / n as f64;
        let mean_true: f64 = pairs.iter().map(|p| p.true_score).sum::<f64>() / n as f64;
        assert!((b - (mean_self - mean_true)).abs() <= 1e-12);
    }
    assert_budget(start, Duration::from_secs(5), "criterion 1");
}

/// Boundary behavior: one-sided constant mass gives exactly 1, mirror
/// symmetry gives 0, degenerate all-zero gives 0, and the statistic never
/// leaves [0, 1].
fn c2_boundary_behavior() {
    let start = Instant::now();
    assert_eq!(distance_skewness(&vec![3.7; 23], 0.0).unwrap(), 1.0);
    assert_eq!(distance_skewness(&vec![-0.4; 5], 0.0).unwrap(), 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let gamma = 1.25;
    let half: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..30.0)).collect();
    let mut mirror: Vec<f64> = half.iter().map(|d| gamma + d).collect();
    mirror.extend(half.iter().map(|d| gamma - d));
    assert!(distance_skewness(&mirror, gamma).unwrap() <= 1e-12);

    assert_eq!(distance_skewness(&[0.0; 9], 0.0).unwrap(), 0.0);

    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let d = distance_skewness(&x, rng.gen_range(-10.0..10.0)).unwrap();
        assert!((0.0..=1.0).contains(&d), "dskew {d} out of range");
    }
    assert_budget(start, Duration::from_secs(5), "criterion 2");
}

/// Hand-checked unit values for dskew, bias, and MQM scoring.
fn c3_hand_values() {
    let d = distance_skewness(&[1.0, 2.0], 0.0).unwrap();
    assert!((d - 5.0 / 6.0).abs() <= 1e-12, "dskew([1,2]) = {d}");

    let pairs: Vec<ScorePair> = (0..50)
        .map(|i| ScorePair::new(format!("s{i}"), 10, -0.52, -15.1))
        .collect();
    let b = bias(&pairs).unwrap();
    assert!((b - 14.58).abs() <= 0.01, "bias {b}");

    let two_major_one_minor = "\
'span one' is a major accuracy/mistranslation error
'span two' is a major accuracy/omission error
'span three' is a minor fluency/grammar error";
    assert_eq!(mqm_score(&parse_mqm_feedback(two_major_one_minor)), -11.0);

    let six_critical: String = (0..6)
        .map(|i| format!("'s{i}' is a critical accuracy/mistranslation error"))
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(mqm_score(&parse_mqm_feedback(&six_critical)), -25.0);
}

/// Concept-coverage labels on both reference sentence/concept pairs.
fn c4_coverage_labels() {
    let concepts: Vec<String> = ["dog", "frisbee", "catch", "throw"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let covered = "A dog leaps to catch a thrown frisbee.";
    assert_eq!(coverage_score(covered, &concepts), 1.0);
    assert!(missing_concepts(covered, &concepts).is_empty());

    let uncovered = "Two dogs are throwing frisbees at each other.";
    assert_eq!(coverage_score(uncovered, &concepts), 0.0);
    assert_eq!(missing_concepts(uncovered, &concepts), vec!["catch".to_string()]);
}

/// Quantile mapping: analytic midpoint, decile transport, and exact rank
/// preservation.
fn c5_quantile_mapping() {
    let start = Instant::now();
    let n = 10_001;
    let source: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let target: Vec<f64> = (0..n).map(|i| -25.0 + 25.0 * i as f64 / (n - 1) as f64).collect();
    let map = QuantileMap::fit(&source, &target).unwrap();
    let mid = map.apply(0.5).unwrap();
    assert!((mid - -12.5).abs() <= 1e-3, "apply(0.5) = {mid}");

    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let source: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>().powi(2)).collect();
    let target: Vec<f64> = (0..10_000).map(|_| -25.0 * rng.gen::<f64>().sqrt()).collect();
    let map = QuantileMap::fit(&source, &target).unwrap();
    let mapped: Vec<f64> = source.iter().map(|v| map.apply(*v).unwrap()).collect();

    // decile transport within 0.5 on the target scale
    let mut sorted_mapped = mapped.clone();
    sorted_mapped.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sorted_target = target.clone();
    sorted_target.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for d in 1..10 {
        let i = d * sorted_mapped.len() / 10;
        let gap = (sorted_mapped[i] - sorted_target[i]).abs();
        assert!(gap < 0.5, "decile {d} off by {gap}");
    }

    // Spearman rank correlation exactly 1: rank vectors coincide
    let ranks = |values: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let mut rank = vec![0usize; values.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        rank
    };
    assert_eq!(ranks(&source), ranks(&mapped), "rank order not preserved");
    assert_budget(start, Duration::from_secs(10), "criterion 5");
}

fn ladder_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("ladder.jsonl");
    std::fs::write(
        &path,
        concat!(
            r#"{"rule": "text", "role": "initial", "params": {"text": "candidate {sample_id} v{iteration}"}}"#,
            "\n",
            r#"{"rule": "text", "role": "refinement", "params": {"text": "candidate {sample_id} v{iteration}"}}"#,
            "\n",
            r#"{"rule": "ladder", "role": "feedback", "params": {"start": -10, "step": 1}}"#,
            "\n",
        ),
    )
    .unwrap();
    path
}

fn run_ladder_trajectories(
    dir: &Path,
    feedback_is_ladder: bool,
    samples: usize,
) -> Vec<Trajectory> {
    let scenario = ladder_scenario(dir);
    let generator = ScriptedProvider::load(&scenario).unwrap();
    let settings = RunSettings::new(TaskKind::Translation, 10, 0);
    let true_scorer = ConstTrue(-10.0);
    let oracle_path = dir.join("oracle.jsonl");
    std::fs::write(
        &oracle_path,
        // constant feedback matching the true score exactly
        format!(
            "{{\"rule\": \"text\", \"role\": \"feedback\", \"params\": {{\"text\": \"{}\"}}}}\n",
            (0..10)
                .map(|i| format!("'e{i}' is a minor accuracy/mistranslation error"))
                .collect::<Vec<_>>()
                .join("\\n")
        ),
    )
    .unwrap();
    let oracle = ScriptedProvider::load(&oracle_path).unwrap();

    (0..samples)
        .map(|i| {
            let task = translation_task(format!("s{i:03}"));
            if feedback_is_ladder {
                run_self_refine(&task, &generator, &generator, &true_scorer, &settings)
            } else {
                run_external_feedback_refine(&task, &generator, &oracle, &true_scorer, &settings)
            }
        })
        .collect()
}

/// Ladder amplification: self-score climbs one point per iteration while the
/// true score stays put, so the bias column counts 0,1,…,10 exactly.
fn c6_amplification_simulation() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let trajectories = run_ladder_trajectories(dir.path(), true, 100);
    let rows = per_iteration_stats(&trajectories).unwrap();
    assert_eq!(rows.len(), 11);
    let mut prev_dskew = -1.0;
    for (i, (iteration, stats)) in rows.iter().enumerate() {
        assert_eq!(*iteration, i as u32);
        assert_eq!(stats.n, 100);
        assert_eq!(stats.bias, i as f64, "bias at iteration {i}");
        assert!(stats.dskew >= prev_dskew, "dskew decreased at iteration {i}");
        prev_dskew = stats.dskew;
    }
    assert_budget(start, Duration::from_secs(30), "criterion 6");
}

/// Best-of-k with self = true + N(0, 3): selected-candidate bias grows with
/// k (expected 3·E[max of k standard normals]: ~0, ~3.09, ~6.80).
fn c7_best_of_k_trend() {
    let start = Instant::now();

    fn hidden_true(sample_id: &str) -> f64 {
        let h = derive_seed(0xFEED, sample_id);
        -25.0 * (h as f64 / u64::MAX as f64)
    }
    fn noise(seed: u64, index: u32) -> f64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        3.0 * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    let generator = FnProvider(
        |req: &CompletionRequest| {
            format!("{}", hidden_true(&req.sample_id) + noise(req.seed, req.index))
        },
        "sim-generator",
    );
    // the feedback prompt is exactly the candidate text; echo it back
    let feedback = FnProvider(|req: &CompletionRequest| req.prompt.clone(), "sim-feedback");

    let tasks: Vec<TaskSpec> = (0..200).map(|i| translation_task(format!("s{i:03}"))).collect();

    struct Hidden;
    impl TrueScorer for Hidden {
        fn score(&self, task: &TaskSpec, _c: &str, _k: u32) -> Result<f64> {
            let h = derive_seed(0xFEED, &task.id);
            Ok(-25.0 * (h as f64 / u64::MAX as f64))
        }
    }

    let mut mean_bias = HashMap::new();
    for &k in &[1u32, 4, 32] {
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..1000u64 {
            let mut settings = RunSettings::new(TaskKind::Translation, 0, seed);
            settings.self_scorer = SelfScorer::Scalar;
            settings.templates = TemplateSet {
                initial: PromptTemplate::new("sim_initial", PromptRole::Initial, "{source}"),
                feedback: Some(PromptTemplate::new(
                    "sim_feedback",
                    PromptRole::Feedback,
                    "{candidate}",
                )),
                refinement: None,
                paraphrase: None,
            };
            for task in &tasks {
                let record = run_best_of_k(task, &generator, &feedback, &Hidden, k, &settings);
                let pair = record.selected_pair().unwrap();
                total += pair.self_score - pair.true_score;
                count += 1;
            }
        }
        mean_bias.insert(k, total / count as f64);
    }
    let (b1, b4, b32) = (mean_bias[&1], mean_bias[&4], mean_bias[&32]);
    assert!(b4 - b1 >= 0.5, "k=4 ({b4:.3}) vs k=1 ({b1:.3})");
    assert!(b32 - b4 >= 0.5, "k=32 ({b32:.3}) vs k=4 ({b4:.3})");
    assert_budget(start, Duration::from_secs(120), "criterion 7");
}

/// Oracle feedback matching the true score suppresses bias entirely, while
/// self-feedback on the same generator amplifies it past 5 by iteration 10.
fn c8_external_feedback_mitigation() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let external = run_ladder_trajectories(dir.path(), false, 100);
    for (iteration, stats) in per_iteration_stats(&external).unwrap() {
        assert!(
            stats.bias.abs() <= 1e-9,
            "external-feedback bias {} at iteration {iteration}",
            stats.bias
        );
    }

    let selfish = run_ladder_trajectories(dir.path(), true, 100);
    let rows = per_iteration_stats(&selfish).unwrap();
    let (_, last) = rows.last().unwrap();
    assert!(last.bias >= 5.0, "self-feedback bias only {}", last.bias);
    assert_budget(start, Duration::from_secs(30), "criterion 8");
}

/// Identical seeds give byte-identical artifacts; the replay provider
/// reproduces the run from its own transcript.
fn c9_determinism_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = ladder_scenario(dir.path());
    let dataset = dir.path().join("tasks.jsonl");
    let scores = dir.path().join("scores.jsonl");
    let mut tasks = String::new();
    let mut score_lines = String::new();
    for i in 0..10 {
        tasks.push_str(&format!(
            "{{\"id\": \"s{i}\", \"source\": \"src\", \"reference\": \"ref\", \"pair\": \"yor-en\"}}\n"
        ));
        for iter in 0..=5 {
            score_lines.push_str(&format!(
                "{{\"sample_id\": \"s{i}\", \"iteration\": {iter}, \"score\": -10}}\n"
            ));
        }
    }
    std::fs::write(&dataset, tasks).unwrap();
    std::fs::write(&scores, score_lines).unwrap();

    let run = |generator: String, out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_selfbias"))
            .args([
                "run",
                "--mode",
                "self-refine",
                "--task",
                "translation",
                "--dataset",
                dataset.to_str().unwrap(),
                "--iterations",
                "5",
                "--seed",
                "11",
                "--generator",
                &generator,
                "--true-scores",
                &format!("file:{}", scores.display()),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(format!("scripted:{}", scenario.display()), &a);
    run(format!("scripted:{}", scenario.display()), &b);
    for file in ["trajectories.jsonl", "report.csv", "report.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let replayed = dir.path().join("replayed");
    run(
        format!("replay:{}", a.join("trajectories.jsonl").display()),
        &replayed,
    );
    assert_eq!(
        std::fs::read(a.join("report.csv")).unwrap(),
        std::fs::read(replayed.join("report.csv")).unwrap(),
        "replay CSV differs"
    );
}

/// The MQM parser is total over arbitrary bytes and exact on the reference
/// annotation lines.
fn c10_mqm_parser_fuzz_and_exemplars() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..200);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let text = String::from_utf8_lossy(&bytes);
        let _: MqmAnnotation = parse_mqm_feedback(&text);
    }

    let single = parse_mqm_feedback(
        "'He locked the WiFi door' is a critical accuracy/mistranslation error",
    );
    assert_eq!(single.errors.len(), 1);
    assert_eq!(single.errors[0].span, "He locked the WiFi door");
    assert_eq!(single.errors[0].severity, Severity::Critical);
    assert_eq!(single.errors[0].category, "accuracy");
    assert_eq!(single.errors[0].subcategory, "mistranslation");
    assert!(!single.parse_warning);

    let block = "\
'of high-speed rail' is a critical accuracy/addition error
'go to the reviews' is a major accuracy/mistranslation error
\"etc.,\" is a minor style/awkward error";
    let parsed = parse_mqm_feedback(block);
    assert_eq!(parsed.errors.len(), 3);
    assert_eq!(
        parsed
            .errors
            .iter()
            .map(|e| e.severity)
            .collect::<Vec<_>>(),
        vec![Severity::Critical, Severity::Major, Severity::Minor]
    );
    assert_eq!(parsed.errors[0].span, "of high-speed rail");
    assert_eq!(parsed.errors[2].category, "style");
    assert_eq!(parsed.errors[2].subcategory, "awkward");

    let clean = parse_mqm_feedback("no-error");
    assert!(clean.errors.is_empty());
    assert!(!clean.parse_warning);
}

// ------------------------------------------------------------------ main

fn main() {
    let criteria: &[(&str, fn())] = &[
        ("statistics oracle equivalence", c1_statistics_oracle_equivalence),
        ("boundary behavior", c2_boundary_behavior),
        ("hand-value unit tests", c3_hand_values),
        ("coverage scorer labels", c4_coverage_labels),
        ("quantile mapping", c5_quantile_mapping),
        ("amplification simulation", c6_amplification_simulation),
        ("best-of-k monotone trend", c7_best_of_k_trend),
        ("external-feedback mitigation", c8_external_feedback_mitigation),
        ("determinism & replay", c9_determinism_and_replay),
        ("MQM parser fuzz", c10_mqm_parser_fuzz_and_exemplars),
    ];

    // keep panic backtraces out of the one-line-per-criterion output
    std::panic::set_hook(Box::new(|_| {}));

    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(run) {
            Ok(()) => println!("[PASS] criterion {}: {}", i + 1, name),
            Err(payload) => {
                let message = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".to_string());
                println!("[FAIL] criterion {}: {} — {}", i + 1, name, message);
                failures += 1;
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criterion(s) failed");
        std::process::exit(1);
    }
}
