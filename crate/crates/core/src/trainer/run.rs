use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::adam::{adam_step, AdamState};
use super::config::{parse_probe_key, StopMetric, TrainingConfig};
use super::data::{fixed_batches, AnalysisData, Loader, Split};
use super::early_stop::EarlyStopper;
use super::hooks::{AnalysisEvent, AnalysisHook};
use crate::corpusgen::{AnnotatedSentence, Corpus};
use crate::diagnose::DiagnoseHook;
use crate::hessian::{HessianHook, HessianSettings};
use crate::intdim::IntDimHook;
use crate::model::{mix, save_checkpoint, Batch, DecoderModel, Tokenizer, TransformerConfig, PAD};
use crate::probes::{load_probe, LabelSet, ProbeHook, ProbeSettings};
use crate::report::{fmt_num, CsvLog, RunManifest};
use crate::{Error, Result};

const DROPOUT_SITE: u64 = 0xd509_0001;
const EVAL_BATCH: usize = 128;

/// Mean next-token loss and argmax accuracy over non-padding targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// Sums cross-entropy and argmax hits for row-major `[N, vocab]` logits
/// against `targets`, skipping `PAD`. Returns `(loss_sum, correct, count)`.
pub fn score_logits(logits: &[f64], vocab: usize, targets: &[usize]) -> (f64, usize, usize) {
    let mut loss = 0.0;
    let (mut correct, mut count) = (0, 0);
    for (row, &t) in logits.chunks_exact(vocab).zip(targets) {
        if t == PAD {
            continue;
        }
        let (arg, max) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
        correct += (arg == t) as usize;
        count += 1;
    }
    (loss, correct, count)
}

/// Evaluation-mode loss and accuracy of `model` over `batches`.
pub fn evaluate(model: &DecoderModel, batches: &[Batch]) -> Result<EvalMetrics> {
    let (mut loss, mut correct, mut count) = (0.0, 0, 0);
    for b in batches {
        let out = model.infer(&b.inputs, b.rows, b.len)?;
        let (l, c, n) = score_logits(out.logits.data(), model.vocab_size(), &b.targets);
        loss += l;
        correct += c;
        count += n;
    }
    if count == 0 {
        return Err(Error::Config("evaluation set has no target positions".into()));
    }
    Ok(EvalMetrics {
        loss: loss / count as f64,
        accuracy: correct as f64 / count as f64,
        count,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub run_dir: PathBuf,
    pub steps: u64,
    pub epochs: u64,
    /// Loss of the first optimisation step.
    pub initial_loss: f64,
    /// Mean loss over the last (up to) 20 steps.
    pub final_loss: f64,
    pub final_val: Option<EvalMetrics>,
    pub uniform_accuracy: f64,
    pub events: Vec<u64>,
    pub stop_reason: String,
    /// Number of `on_event` calls per hook name.
    pub hook_calls: BTreeMap<String, usize>,
    /// Times the shared analysis inputs were built (0 with every flag off).
    pub analysis_builds: usize,
    pub hook_summaries: BTreeMap<String, Value>,
}

/// Optimisation loop with an analysis hook bus.
pub struct Trainer {
    config: TrainingConfig,
    hooks: Vec<Box<dyn AnalysisHook>>,
}

impl Trainer {
    pub fn new(config: TrainingConfig) -> Result<Trainer> {
        config.validate()?;
        Ok(Trainer {
            config,
            hooks: Vec::new(),
        })
    }

    pub fn with_hook(mut self, hook: Box<dyn AnalysisHook>) -> Trainer {
        self.hooks.push(hook);
        self
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn hooks(&self) -> &[Box<dyn AnalysisHook>] {
        &self.hooks
    }

    /// Trains `model` on `sentences`, writing logs, checkpoints and hook
    /// outputs under `run_dir`. `run_info` is stored verbatim in
    /// `config.json` next to the training and model configs.
    pub fn train(
        &mut self,
        model: &mut DecoderModel,
        tokenizer: &Tokenizer,
        sentences: &[AnnotatedSentence],
        run_dir: &Path,
        run_info: Value,
    ) -> Result<TrainReport> {
        let cfg = self.config.clone();
        if tokenizer.len() != model.vocab_size() {
            return Err(Error::Config(format!(
                "tokenizer has {} entries but the model was built for {}",
                tokenizer.len(),
                model.vocab_size()
            )));
        }
        if cfg.early_stop.is_some_and(|e| e.metric != StopMetric::TrainLoss) && cfg.val_fraction == 0.0 {
            return Err(Error::Config("early stopping on a validation metric needs val_fraction > 0".into()));
        }
        let max_len = model.config().max_seq_length;
        let split = Split::new(sentences.len(), cfg.val_fraction, cfg.seed)?;
        let loader = Loader::new(split.train.clone(), cfg.batch_size, cfg.seed)?;
        let val_batches = fixed_batches(tokenizer, sentences, &split.val, EVAL_BATCH, max_len)?;

        fs::create_dir_all(run_dir.join("metrics")).map_err(|e| Error::io(run_dir, e))?;
        let mut manifest = RunManifest::start(cfg.seed);
        let config_json = json!({
            "training": cfg.to_json(),
            "model": model.config(),
            "precision": model.precision(),
            "vocab_size": model.vocab_size(),
            "num_params": model.num_params(),
            "split": {"train": split.train.len(), "val": split.val.len()},
            "analysis": {
                "id_population": "token_positions",
                "diagnostics": "teacher_forced",
            },
            "run": run_info,
        });
        write_json(&run_dir.join("config.json"), &config_json)?;
        manifest.register_config("training", "config.json");

        let mut loss_log = CsvLog::create(&run_dir.join("metrics/train_loss.csv"), &["step", "loss"])?;
        let mut val_log = CsvLog::create(&run_dir.join("metrics/val.csv"), &["epoch", "loss", "accuracy"])?;

        let mut analysis_builds = 0;
        let data = if self.hooks.is_empty() {
            None
        } else {
            analysis_builds += 1;
            Some(AnalysisData::build(tokenizer, sentences, &split, &cfg, max_len)?)
        };
        let checkpoint_extra = json!({ "training": cfg.to_json() });
        let mut stopper = cfg.early_stop.map(EarlyStopper::new);

        let mut adam = AdamState::new(model.num_params());
        let mut params = model.params().to_vec();
        let mut losses: Vec<f64> = Vec::new();
        let mut hook_calls: BTreeMap<String, usize> = BTreeMap::new();
        let mut events = Vec::new();
        let mut final_val = None;
        let mut stop_reason = String::from("completed all epochs");
        let max_steps = cfg.max_steps.unwrap_or(u64::MAX);
        let mut step: u64 = 0;
        let mut epoch: u64 = 0;
        let mut stopped = false;

        while !stopped && (epoch as usize) < cfg.epochs {
            let mut rows = Vec::new();
            for chunk in loader.epoch(epoch) {
                let batch = Batch::from_sentences(tokenizer, sentences, &chunk, max_len)?;
                step += 1;
                let (loss, grad) = model.loss_and_grad(&params, &batch, Some(mix(mix(cfg.seed, DROPOUT_SITE), step)))?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at step {step}")));
                }
                adam_step(&mut params, &grad, &mut adam, cfg.learning_rate)
                    .map_err(|e| Error::Numeric(format!("step {step}: {e}")))?;
                model.set_params(&params)?;
                model.round_to_precision();
                params.copy_from_slice(model.params());
                losses.push(loss);
                rows.push([step.to_string(), fmt_num(Some(loss))]);

                if step.is_multiple_of(cfg.track_interval) {
                    loss_log.append_all(&std::mem::take(&mut rows))?;
                    events.push(step);
                    let snapshot = model.clone();
                    save_checkpoint(
                        &run_dir.join(format!("checkpoints/step_{step}.ckpt")),
                        &snapshot,
                        tokenizer,
                        step,
                        &checkpoint_extra,
                    )?;
                    manifest.register(&format!("checkpoints/step_{step}.ckpt"));
                    if let Some(data) = &data {
                        let event = AnalysisEvent::new(step, &snapshot, Some(loss), Some(&batch), data);
                        for hook in &mut self.hooks {
                            hook.on_event(&event)?;
                            *hook_calls.entry(hook.name().to_string()).or_default() += 1;
                        }
                    }
                    if let Some(stopper) = &mut stopper {
                        let value = match stopper.metric() {
                            StopMetric::TrainLoss => recent_mean(&losses, cfg.track_interval as usize),
                            StopMetric::ValLoss => evaluate(&snapshot, &val_batches)?.loss,
                            StopMetric::ValAccuracy => evaluate(&snapshot, &val_batches)?.accuracy,
                        };
                        if let Some(reason) = stopper.observe(value) {
                            log::info!("step {step}: {reason}");
                            stop_reason = format!("{reason} (step {step})");
                            stopped = true;
                        }
                    }
                }
                if !stopped && step >= max_steps {
                    stop_reason = format!("reached max_steps={max_steps}");
                    stopped = true;
                }
                if stopped {
                    break;
                }
            }
            loss_log.append_all(&rows)?;
            if !val_batches.is_empty() {
                let m = evaluate(model, &val_batches)?;
                log::info!("epoch {epoch}: val loss {:.4} accuracy {:.4}", m.loss, m.accuracy);
                val_log.append(&[epoch.to_string(), fmt_num(Some(m.loss)), fmt_num(Some(m.accuracy))])?;
                final_val = Some(m);
            }
            epoch += 1;
        }

        manifest.register("metrics/train_loss.csv");
        manifest.register("metrics/val.csv");
        let mut hook_summaries = BTreeMap::new();
        for hook in &self.hooks {
            for p in hook.outputs() {
                if let Ok(rel) = p.strip_prefix(run_dir) {
                    manifest.register(&rel.to_string_lossy());
                }
            }
            hook_summaries.insert(hook.name().to_string(), hook.summary());
        }
        let report = TrainReport {
            run_dir: run_dir.to_path_buf(),
            steps: step,
            epochs: epoch,
            initial_loss: losses.first().copied().unwrap_or(f64::NAN),
            final_loss: recent_mean(&losses, 20),
            final_val,
            uniform_accuracy: 1.0 / model.vocab_size() as f64,
            events,
            stop_reason: stop_reason.clone(),
            hook_calls,
            analysis_builds,
            hook_summaries,
        };
        write_json(
            &run_dir.join("summary.json"),
            &serde_json::to_value(&report).map_err(|e| Error::Data(e.to_string()))?,
        )?;
        manifest.register("summary.json");
        manifest.finish(&stop_reason);
        manifest.save(run_dir)?;
        Ok(report)
    }
}

fn recent_mean(xs: &[f64], n: usize) -> f64 {
    let tail = &xs[xs.len().saturating_sub(n.max(1))..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Instantiates one hook per enabled analysis flag.
pub fn default_hooks(
    config: &TrainingConfig,
    model: &DecoderModel,
    run_dir: &Path,
) -> Result<Vec<Box<dyn AnalysisHook>>> {
    let mut hooks: Vec<Box<dyn AnalysisHook>> = Vec::new();
    let layers = model.config().num_decoder_layers;
    let mut frozen: BTreeMap<LabelSet, BTreeMap<usize, _>> = BTreeMap::new();
    for (key, path) in &config.probe_load_paths {
        let (layer, stack) = parse_probe_key(key)?;
        let probe = load_probe(path)?;
        probe.check_compatible(model.config(), layer, &stack)?;
        frozen.entry(probe.label_set).or_default().insert(layer, probe);
    }
    let settings = ProbeSettings {
        epochs: config.probe_epochs,
        learning_rate: config.probe_learning_rate,
        seed: config.seed,
        threshold: config.emergence_threshold,
        patience: config.emergence_patience,
    };
    for (set, flag) in [
        (LabelSet::Pos, config.track_linguistic_probes),
        (LabelSet::Roles, config.track_semantic_probes),
    ] {
        let pinned = frozen.remove(&set).unwrap_or_default();
        if flag || !pinned.is_empty() {
            hooks.push(Box::new(ProbeHook::new(run_dir, set, layers, settings, pinned)?));
        }
    }
    if config.track_intrinsic_dimensions {
        hooks.push(Box::new(IntDimHook::new(run_dir, config.id_method, config.seed)?));
    }
    if config.curvature_enabled() {
        hooks.push(Box::new(HessianHook::new(
            run_dir,
            HessianSettings {
                k: config.hessian_n_components,
                probes: config.hutchinson_probes,
                alignment: config.track_gradient_alignment,
                components: config.track_component_hessian,
                seed: config.seed,
                eps_scale: None,
            },
        )?));
    }
    if config.track_pos_performance || config.track_semantic_roles_performance {
        hooks.push(Box::new(DiagnoseHook::new(
            run_dir,
            config.track_pos_performance,
            config.track_semantic_roles_performance,
            config.semantic_roles_granularity,
        )?));
    }
    Ok(hooks)
}

/// Builds the tokenizer and model from `corpus`, attaches the hooks enabled
/// in `config`, and trains.
pub fn run_training(
    corpus: &Corpus,
    model_config: &TransformerConfig,
    config: &TrainingConfig,
    run_dir: &Path,
) -> Result<TrainReport> {
    let tokenizer = Tokenizer::build(&corpus.sentences)?;
    let mut model = DecoderModel::new(model_config.clone(), tokenizer.len(), config.seed)?
        .with_precision(config.precision.from_env_or());
    model.round_to_precision();
    let mut trainer = Trainer::new(config.clone())?;
    for hook in default_hooks(config, &model, run_dir)? {
        trainer = trainer.with_hook(hook);
    }
    let info = json!({ "corpus": corpus.metadata });
    trainer.train(&mut model, &tokenizer, &corpus.sentences, run_dir, info)
}
