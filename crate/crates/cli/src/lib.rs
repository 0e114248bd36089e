//! Command-line front end: `generate`, `train`, `analyze` and `report`.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for data
//! errors (unreadable or malformed inputs), 4 for numeric failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use trace_core::corpusgen::{load_corpus, save_corpus, CorpusConfig};
use trace_core::model::{load_checkpoint, TransformerConfig};
use trace_core::report::render_run;
use trace_core::trainer::{default_hooks, run_training, AnalysisData, AnalysisEvent, Split, TrainingConfig};
use trace_core::{Error, ErrorKind, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "trace", version, about = "Synthetic corpora and training-time analysis for small decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an annotated corpus.
    Generate(GenerateArgs),
    /// Train a model with the analyses enabled in the training config.
    Train(TrainArgs),
    /// Run analysis modules on a saved checkpoint.
    Analyze(AnalyzeArgs),
    /// Render SVG charts for every metrics file of a run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    num: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Corpus config JSON; defaults to the built-in configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Pretty-print with two-space indentation.
    #[arg(long)]
    indent: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long = "model-config")]
    model_config: PathBuf,
    #[arg(long = "train-config")]
    train_config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated: probes, pos_probes, role_probes, intdim, hessian, diagnose.
    #[arg(long, value_delimiter = ',', required = true)]
    modules: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    /// Accepted for compatibility; charts are always SVG.
    #[arg(long)]
    svg: bool,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config | ErrorKind::Usage => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numeric => EXIT_NUMERIC,
    }
}

/// Reads a configuration file; a missing or unreadable file is a config error.
fn read_config(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => CorpusConfig::from_json(&read_config(p, "corpus config")?)?,
        None => CorpusConfig::default(),
    };
    let corpus = cfg.generate(a.num, a.seed)?;
    save_corpus(&corpus, &a.out, a.indent)?;
    let s = &corpus.statistics;
    println!(
        "wrote {} sentences to {} (vocabulary {}, mean length {:.3})",
        corpus.sentences.len(),
        a.out.display(),
        s.vocabulary_size,
        s.mean_length
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let model_cfg = TransformerConfig::from_json(&read_config(&a.model_config, "model config")?)?;
    let cfg = TrainingConfig::from_json(&read_config(&a.train_config, "training config")?)?;
    let report = run_training(&corpus, &model_cfg, &cfg, &a.out)?;
    println!(
        "{} steps, loss {:.4} -> {:.4}; {}; run written to {}",
        report.steps,
        report.initial_loss,
        report.final_loss,
        report.stop_reason,
        a.out.display()
    );
    Ok(())
}

/// Turns the requested module names into tracking flags on top of `base`.
fn enable_modules(base: &TrainingConfig, modules: &[String]) -> Result<TrainingConfig> {
    let mut cfg = TrainingConfig {
        track_hessian: false,
        track_linguistic_probes: false,
        track_semantic_probes: false,
        track_intrinsic_dimensions: false,
        track_pos_performance: false,
        track_semantic_roles_performance: false,
        track_gradient_alignment: false,
        track_component_hessian: false,
        ..base.clone()
    };
    for m in modules.iter().map(|m| m.trim()).filter(|m| !m.is_empty()) {
        match m {
            "probes" => {
                cfg.track_linguistic_probes = true;
                cfg.track_semantic_probes = true;
            }
            "pos_probes" => cfg.track_linguistic_probes = true,
            "role_probes" => cfg.track_semantic_probes = true,
            "intdim" => cfg.track_intrinsic_dimensions = true,
            "hessian" => {
                cfg.track_hessian = true;
                cfg.track_gradient_alignment = base.track_gradient_alignment;
                cfg.track_component_hessian = base.track_component_hessian;
            }
            "diagnose" => {
                cfg.track_pos_performance = true;
                cfg.track_semantic_roles_performance = true;
            }
            other => {
                return Err(Error::Usage(format!(
                    "unknown module {other:?}; expected probes, pos_probes, role_probes, intdim, hessian or diagnose"
                )))
            }
        }
    }
    if !cfg.any_tracking() {
        return Err(Error::Usage("no analysis modules selected".into()));
    }
    Ok(cfg)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let base = match ckpt.extra.get("training") {
        Some(t) => TrainingConfig::from_json(&t.to_string())?,
        None => TrainingConfig::default(),
    };
    let cfg = enable_modules(&base, &a.modules)?;
    let model = ckpt.model.with_precision(cfg.precision.from_env_or());
    let split = Split::new(corpus.sentences.len(), cfg.val_fraction, cfg.seed)?;
    let data = AnalysisData::build(
        &ckpt.tokenizer,
        &corpus.sentences,
        &split,
        &cfg,
        model.config().max_seq_length,
    )?;
    let mut hooks = default_hooks(&cfg, &model, &a.out)?;
    let event = AnalysisEvent::new(ckpt.step, &model, None, None, &data);
    let mut summaries = serde_json::Map::new();
    let mut outputs = Vec::new();
    for hook in &mut hooks {
        hook.on_event(&event)?;
        summaries.insert(hook.name().to_string(), hook.summary());
        outputs.extend(hook.outputs());
    }
    let summary = json!({
        "checkpoint": a.checkpoint,
        "step": ckpt.step,
        "modules": a.modules,
        "outputs": outputs,
        "summaries": summaries,
    });
    let path = a.out.join("analysis.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Data(e.to_string()))? + "\n";
    fs::write(&path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    println!("analysed step {} into {}", ckpt.step, a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if !a.run.is_dir() {
        return Err(Error::Data(format!("run directory {} does not exist", a.run.display())));
    }
    let out = render_run(&a.run)?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    println!("rendered {} charts under {}", out.charts.len(), a.run.join("charts").display());
    Ok(())
}
