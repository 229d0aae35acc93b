//! Command-line surface: `calibrate`, `run`, `score`, `report`, `validate`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::calibrate::QuantileMap;
use crate::config::{RunConfig, RunMode};
use crate::error::{Error, Result};
use crate::formats;
use crate::pipeline::{
    run_best_of_k, run_dataset, run_paraphrase_probe, run_self_consistency, run_self_refine,
    CalibratedScores, CoverageTrueScorer, ExactMatchTrueScorer, FileScores, MqmFileScores,
    RunSettings, SelectionRecord, TaskKind, Trajectory, TrueScorer,
};
use crate::providers::{build_provider, TemplateSet};
use crate::report::{
    render_csv, selection_report, trajectory_report, write_csv, write_json, Report, ReportRow,
};
use crate::stats::{bias_stats, ScorePair};

#[derive(Parser)]
#[command(name = "selfbias", version, about = "Self-bias measurement harness")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit or apply quantile calibration maps.
    Calibrate {
        #[command(subcommand)]
        action: CalibrateAction,
    },
    /// Execute an experiment over a task dataset.
    Run(RunArgs),
    /// Recompute bias statistics from trajectory or score-pair files.
    Score(ScoreArgs),
    /// Emit CSV/JSON reports from trajectory or selection files.
    Report(ReportArgs),
    /// Schema-check input files.
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum CalibrateAction {
    /// Fit a quantile map from sample files or a paired corpus.
    Fit {
        /// JSONL of source-scale samples, one JSON number per line.
        #[arg(long)]
        source: Option<PathBuf>,
        /// JSONL of target-scale samples, one JSON number per line.
        #[arg(long)]
        target: Option<PathBuf>,
        /// JSONL corpus of {metric_score, human_score} pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map values through a fitted quantile map.
    Apply {
        #[arg(long)]
        map: PathBuf,
        /// Values to map; printed one per line.
        #[arg(long)]
        value: Vec<f64>,
        /// JSONL of input values, one JSON number per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output JSONL (required with --input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: RunMode,
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    iterations: u32,
    /// Candidate counts for best-of-k; comma-separated for sweeps.
    #[arg(long, default_value = "1")]
    k: String,
    /// Reasoning paths per self-consistency iteration.
    #[arg(long, default_value_t = 10)]
    paths: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for trajectories/selections and reports.
    #[arg(long)]
    out: PathBuf,
    /// Generator provider spec: scripted:<file>, replay:<file>, http:<config>.
    #[arg(long)]
    generator: String,
    /// Self-feedback provider spec; defaults to the generator.
    #[arg(long)]
    feedback: Option<String>,
    /// External feedback provider spec (external-feedback mode).
    #[arg(long)]
    external_feedback: Option<String>,
    /// True-score source: coverage | exact-match | mqm:<file> | file:<file> |
    /// calibrated:<file>.
    #[arg(long)]
    true_scores: Option<String>,
    /// Fitted quantile map JSON (required with calibrated: true scores).
    #[arg(long)]
    calibration_map: Option<PathBuf>,
    /// Directory overriding the bundled prompt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Task kind used to validate score-pair scales.
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    selections: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, requires = "task")]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    match s {
        "translation" => Ok(TaskKind::Translation),
        "constrained-gen" | "constrained_gen" => Ok(TaskKind::ConstrainedGen),
        "math" => Ok(TaskKind::Math),
        other => Err(format!(
            "unknown task '{other}' (expected translation, constrained-gen, or math)"
        )),
    }
}

fn parse_mode(s: &str) -> std::result::Result<RunMode, String> {
    match s {
        "self-refine" => Ok(RunMode::SelfRefine),
        "self-consistency" => Ok(RunMode::SelfConsistency),
        "best-of-k" => Ok(RunMode::BestOfK),
        "paraphrase" => Ok(RunMode::Paraphrase),
        "external-feedback" => Ok(RunMode::ExternalFeedback),
        other => Err(format!(
            "unknown mode '{other}' (expected self-refine, self-consistency, best-of-k, \
             paraphrase, or external-feedback)"
        )),
    }
}

fn parse_k_list(s: &str) -> Result<Vec<u32>> {
    let mut ks = Vec::new();
    for part in s.split(',') {
        let k: u32 = part
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("invalid k value '{part}'")))?;
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        ks.push(k);
    }
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// One JSON number per line.
fn read_number_lines(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str::<f64>(line.trim()).map_err(|e| Error::Schema {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn build_true_scorer(
    spec: Option<&str>,
    task: TaskKind,
    calibration_map: Option<&Path>,
) -> Result<Box<dyn TrueScorer>> {
    let spec = match spec {
        Some(s) => s,
        None => match task {
            TaskKind::ConstrainedGen => "coverage",
            TaskKind::Math => "exact-match",
            TaskKind::Translation => {
                return Err(Error::Validation(
                    "translation runs need --true-scores (mqm:<file>, file:<file>, or \
                     calibrated:<file>)"
                        .into(),
                ))
            }
        },
    };
    match spec {
        "coverage" => Ok(Box::new(CoverageTrueScorer)),
        "exact-match" => Ok(Box::new(ExactMatchTrueScorer)),
        other => match other.split_once(':') {
            Some(("mqm", path)) => Ok(Box::new(MqmFileScores::new(
                formats::load_mqm_annotations(Path::new(path))?,
            ))),
            Some(("file", path)) => Ok(Box::new(FileScores::new(formats::load_external_scores(
                Path::new(path),
            )?))),
            Some(("calibrated", path)) => {
                let map_path = calibration_map.ok_or_else(|| {
                    Error::Validation("calibrated: true scores need --calibration-map".into())
                })?;
                let map: QuantileMap =
                    serde_json::from_str(&std::fs::read_to_string(map_path)?)?;
                Ok(Box::new(CalibratedScores::new(
                    formats::load_external_scores(Path::new(path))?,
                    map,
                )?))
            }
            _ => Err(Error::Validation(format!(
                "unknown true-score spec '{other}'"
            ))),
        },
    }
}

fn load_map(path: &Path) -> Result<QuantileMap> {
    let map: QuantileMap = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    map.validate()?;
    Ok(map)
}

fn file_hash(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(std::fs::read(path)?);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn cmd_calibrate(action: CalibrateAction) -> Result<()> {
    match action {
        CalibrateAction::Fit {
            source,
            target,
            pairs,
            out,
        } => {
            let (source_samples, target_samples) = match (source, target, pairs) {
                (Some(s), Some(t), None) => (read_number_lines(&s)?, read_number_lines(&t)?),
                (None, None, Some(p)) => formats::load_calibration_pairs(&p)?,
                _ => {
                    return Err(Error::Validation(
                        "calibrate fit needs either --source and --target, or --pairs".into(),
                    ))
                }
            };
            let map = QuantileMap::fit(&source_samples, &target_samples)?;
            let mut text = serde_json::to_string_pretty(&map)?;
            text.push('\n');
            formats::write_atomic(&out, &text)?;
            Ok(())
        }
        CalibrateAction::Apply {
            map,
            value,
            input,
            out,
        } => {
            let map = load_map(&map)?;
            for v in &value {
                println!("{}", map.apply(*v)?);
            }
            if let Some(input) = input {
                let out = out.ok_or_else(|| {
                    Error::Validation("calibrate apply --input needs --out".into())
                })?;
                let mut text = String::new();
                for v in read_number_lines(&input)? {
                    text.push_str(&format!("{}\n", map.apply(v)?));
                }
                formats::write_atomic(&out, &text)?;
            }
            Ok(())
        }
    }
}

fn write_run_artifacts(
    out: &Path,
    key_column: &str,
    rows: Vec<ReportRow>,
    config: &RunConfig,
    provider_tags: Vec<String>,
) -> Result<()> {
    write_csv(&out.join("report.csv"), key_column, &rows)?;
    write_json(
        &out.join("report.json"),
        &Report {
            key_column: key_column.to_string(),
            seed: config.seed,
            config_hash: config.hash()?,
            provider_tags,
            rows,
        },
    )
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let ks = parse_k_list(&args.k)?;
    let config = RunConfig {
        mode: args.mode,
        task: args.task,
        dataset: args.dataset.display().to_string(),
        iterations: args.iterations,
        k: ks.clone(),
        paths: args.paths,
        seed: args.seed,
        workers: args.workers,
        generator: args.generator.clone(),
        feedback: args.feedback.clone(),
        external_feedback: args.external_feedback.clone(),
        true_scores: args.true_scores.clone(),
        calibration_map: args.calibration_map.as_ref().map(|p| p.display().to_string()),
        templates: args.templates.as_ref().map(|p| p.display().to_string()),
    };

    let mut settings = RunSettings::new(args.task, args.iterations, args.seed);
    if let Some(dir) = &args.templates {
        settings.templates = TemplateSet::load_dir(dir, args.task)?;
    }
    let generator = build_provider(&args.generator)?;
    let true_scorer = build_true_scorer(
        args.true_scores.as_deref(),
        args.task,
        args.calibration_map.as_deref(),
    )?;
    std::fs::create_dir_all(&args.out)?;

    let feedback_spec = |default: &str| -> String {
        args.feedback.clone().unwrap_or_else(|| default.to_string())
    };

    match args.mode {
        RunMode::SelfRefine | RunMode::ExternalFeedback => {
            let feedback = if args.mode == RunMode::ExternalFeedback {
                let spec = args.external_feedback.as_deref().ok_or_else(|| {
                    Error::Validation("external-feedback mode needs --external-feedback".into())
                })?;
                build_provider(spec)?
            } else {
                build_provider(&feedback_spec(&args.generator))?
            };
            let tasks = formats::load_tasks(&args.dataset, args.task)?;
            let trajectories: Vec<Trajectory> = run_dataset(&tasks, args.workers, |task| {
                run_self_refine(task, &*generator, &*feedback, &*true_scorer, &settings)
            });
            formats::write_trajectories(&args.out.join("trajectories.jsonl"), &trajectories)?;
            let rows = trajectory_report(&trajectories)?;
            write_run_artifacts(
                &args.out,
                "iteration",
                rows,
                &config,
                vec![generator.tag(), feedback.tag()],
            )
        }
        RunMode::SelfConsistency => {
            let tasks = formats::load_tasks(&args.dataset, args.task)?;
            let trajectories: Vec<Trajectory> = run_dataset(&tasks, args.workers, |task| {
                run_self_consistency(task, &*generator, args.paths, &settings)
            });
            formats::write_trajectories(&args.out.join("trajectories.jsonl"), &trajectories)?;
            let rows = trajectory_report(&trajectories)?;
            write_run_artifacts(&args.out, "iteration", rows, &config, vec![generator.tag()])
        }
        RunMode::BestOfK => {
            let feedback = build_provider(&feedback_spec(&args.generator))?;
            let tasks = formats::load_tasks(&args.dataset, args.task)?;
            let mut selections: Vec<SelectionRecord> = Vec::new();
            for &k in &ks {
                selections.extend(run_dataset(&tasks, args.workers, |task| {
                    run_best_of_k(task, &*generator, &*feedback, &*true_scorer, k, &settings)
                }));
            }
            formats::write_selections(&args.out.join("selections.jsonl"), &selections)?;
            let rows = selection_report(&selections, 0.0)?;
            write_run_artifacts(
                &args.out,
                "k",
                rows,
                &config,
                vec![generator.tag(), feedback.tag()],
            )
        }
        RunMode::Paraphrase => {
            let feedback = build_provider(&feedback_spec(&args.generator))?;
            let items = formats::load_paraphrase_items(&args.dataset, args.task)?;
            let (before, after) =
                run_paraphrase_probe(&items, &*generator, &*feedback, &*true_scorer, &settings)?;
            let rows = vec![ReportRow::new(0, before), ReportRow::new(1, after)];
            write_run_artifacts(
                &args.out,
                "iteration",
                rows,
                &config,
                vec![generator.tag(), feedback.tag()],
            )
        }
    }
}

fn pair_rows(pairs: &[ScorePair]) -> Result<Vec<ReportRow>> {
    let mut iterations: Vec<u32> = pairs.iter().map(|p| p.iteration).collect();
    iterations.sort_unstable();
    iterations.dedup();
    iterations
        .into_iter()
        .map(|iteration| {
            let at: Vec<ScorePair> = pairs
                .iter()
                .filter(|p| p.iteration == iteration)
                .cloned()
                .collect();
            Ok(ReportRow::new(iteration, bias_stats(&at, 0.0)?))
        })
        .collect()
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let rows = match (&args.trajectories, &args.pairs) {
        (Some(path), None) => trajectory_report(&formats::read_trajectories(path)?)?,
        (None, Some(path)) => {
            let pairs = formats::ingest_score_pairs(path, args.task.map(|t| t.scale()))?;
            pair_rows(&pairs)?
        }
        _ => {
            return Err(Error::Validation(
                "score needs exactly one of --trajectories or --pairs".into(),
            ))
        }
    };
    print!("{}", render_csv("iteration", &rows));
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let (key_column, rows, config_hash, mut tags) = match (&args.trajectories, &args.selections) {
        (Some(path), None) => {
            let trajectories = formats::read_trajectories(path)?;
            let tags: Vec<String> = trajectories.iter().map(|t| t.provider_tag.clone()).collect();
            (
                "iteration",
                trajectory_report(&trajectories)?,
                file_hash(path)?,
                tags,
            )
        }
        (None, Some(path)) => {
            let selections = formats::read_selections(path)?;
            ("k", selection_report(&selections, 0.0)?, file_hash(path)?, Vec::new())
        }
        _ => {
            return Err(Error::Validation(
                "report needs exactly one of --trajectories or --selections".into(),
            ))
        }
    };
    tags.sort();
    tags.dedup();
    write_csv(&args.out.join("report.csv"), key_column, &rows)?;
    write_json(
        &args.out.join("report.json"),
        &Report {
            key_column: key_column.to_string(),
            seed: 0,
            config_hash,
            provider_tags: tags,
            rows,
        },
    )
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let mut checked = 0;
    if let Some(path) = &args.dataset {
        let kind = args.task.unwrap();
        let tasks = formats::load_tasks(path, kind)?;
        println!("ok: {} ({} tasks)", path.display(), tasks.len());
        checked += 1;
    }
    if let Some(path) = &args.pairs {
        let pairs = formats::ingest_score_pairs(path, args.task.map(|t| t.scale()))?;
        println!("ok: {} ({} score pairs)", path.display(), pairs.len());
        checked += 1;
    }
    if let Some(path) = &args.scores {
        let scores = formats::load_external_scores(path)?;
        println!("ok: {} ({} scores)", path.display(), scores.len());
        checked += 1;
    }
    if let Some(path) = &args.map {
        load_map(path)?;
        println!("ok: {} (quantile map)", path.display());
        checked += 1;
    }
    if let Some(path) = &args.trajectories {
        let trajectories = formats::read_trajectories(path)?;
        println!("ok: {} ({} trajectories)", path.display(), trajectories.len());
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::Validation("validate needs at least one input file".into()));
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate { action } => cmd_calibrate(action),
        Command::Run(args) => cmd_run(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
        Command::Validate(args) => cmd_validate(args),
    }
}
