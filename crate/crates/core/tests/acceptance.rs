//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset
//! (`cargo test --test acceptance -- 1 5 8`).

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::oracles::{
    circle, dense_eigenvalues, explicit_hessian, gaussian, matvec, micro_model, random_batch, random_psd,
    random_rotation, random_symmetric, rel_err, rng, sphere, transform, twonn_oracle,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trace_core::corpusgen::{
    build_lexicon, corpus_from_json, corpus_to_json, standard_frames, Category, Complexity, CorpusConfig,
    LexiconParams, VocabularySpec,
};
use trace_core::hessian::{hutchinson_trace, lanczos, DenseOracle, HvpOracle, ModelOracle};
use trace_core::intdim::{twonn_estimate, PointCloud, DEFAULT_DISCARD};
use trace_core::model::{load_checkpoint, DecoderModel, Tokenizer, TransformerConfig};
use trace_core::probes::{emergence_step, fit_probe, probe_confidence, LabelSet, ProbeDataset, ProbeModel, DECODER_STACK};
use trace_core::report::render_run;
use trace_core::tensor::gradcheck::check_op;
use trace_core::tensor::Precision;
use trace_core::trainer::{
    default_hooks, evaluate, fixed_batches, AnalysisEvent, AnalysisHook, Split, TrainReport, Trainer, TrainingConfig,
};

type Outcome = Result<String, String>;
type Scripted<'a> = (&'a [(u64, f64)], f64, usize, Option<u64>);
type Criterion = (usize, &'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 --------------------------------------------------------------------------

fn zipf_slope(counts: &mut [usize]) -> f64 {
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(r, &c)| (((r + 1) as f64).ln(), (c as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn zipf_compliance() -> Outcome {
    let t0 = Instant::now();
    let params = LexiconParams {
        zipfian_alpha: 1.05,
        ..LexiconParams::default()
    };
    let lex = build_lexicon(&VocabularySpec::appendix(), &params).map_err(err)?;
    let pool = lex.pool(Category::Noun).map_err(err)?.len();
    let mut counts = vec![0usize; pool];
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100_000 {
        let t = lex.sample_token(Category::Noun, &mut r).map_err(err)?;
        counts[lex.lookup(t).ok_or("sampled token not in lexicon")?.1] += 1;
    }
    let slope = zipf_slope(&mut counts);
    let el = t0.elapsed();
    ensure((-1.20..=-0.90).contains(&slope), format!("slope {slope:.4} outside [-1.20, -0.90]"))?;
    ensure(el < Duration::from_secs(5), format!("took {el:?}"))?;
    Ok(format!("slope {slope:.4} over {pool} nouns in {el:.2?}"))
}

// 2 --------------------------------------------------------------------------

fn distribution_fidelity() -> Outcome {
    let t0 = Instant::now();
    let cfg = CorpusConfig::default();
    let corpus = cfg.generate(Some(10_000), Some(7)).map_err(err)?;
    let n = corpus.sentences.len() as f64;
    let mut counts: BTreeMap<Complexity, usize> = BTreeMap::new();
    for s in &corpus.sentences {
        *counts.entry(s.metadata.complexity).or_default() += 1;
    }
    let mut parts = Vec::new();
    for (c, want) in [(Complexity::Simple, 0.55), (Complexity::Medium, 0.35), (Complexity::Complex, 0.10)] {
        let got = counts.get(&c).copied().unwrap_or(0) as f64 / n;
        ensure((got - want).abs() <= 0.02, format!("{c}: {got:.4} vs {want}"))?;
        parts.push(format!("{c} {got:.4}"));
    }
    for indent in [false, true] {
        let text = corpus_to_json(&corpus, indent).map_err(err)?;
        let back = corpus_from_json(&text).map_err(err)?;
        ensure(corpus_to_json(&back, indent).map_err(err)? == text, "round trip changed bytes")?;
    }
    let el = t0.elapsed();
    ensure(el < Duration::from_secs(30), format!("took {el:?}"))?;
    Ok(format!("{}; round trip byte-identical; {el:.2?}", parts.join(", ")))
}

// 3 --------------------------------------------------------------------------

fn annotation_consistency() -> Outcome {
    let cfg = CorpusConfig::default();
    let lex = cfg.lexicon().map_err(err)?;
    let frames: HashMap<String, _> = standard_frames().into_iter().map(|f| (f.name.clone(), f)).collect();
    let corpus = cfg.generate(Some(25_000), Some(99)).map_err(err)?;
    let mut violations = Vec::new();
    let mut roles = 0;
    for (i, s) in corpus.sentences.iter().enumerate() {
        if s.pos_tags.len() != s.tokens.len() {
            violations.push(format!("sentence {i}: {} tags for {} tokens", s.pos_tags.len(), s.tokens.len()));
        }
        let Some(frame) = frames.get(&s.metadata.frame) else {
            violations.push(format!("sentence {i}: unknown frame {}", s.metadata.frame));
            continue;
        };
        for r in &s.roles {
            roles += 1;
            let slot = frame.slots.get(r.position);
            let token_cat = s.tokens.get(r.position).and_then(|t| lex.lookup(t)).map(|(c, _)| c);
            let ok = slot.is_some_and(|sl| sl.role == Some(r.role) && Some(sl.category) == token_cat);
            if !ok {
                violations.push(format!("sentence {i}: role {} at {} has token category {token_cat:?}", r.role, r.position));
            }
        }
    }
    ensure(violations.is_empty(), format!("{} violations, first: {}", violations.len(), violations.first().cloned().unwrap_or_default()))?;
    Ok(format!("{} sentences, {roles} role positions, 0 violations", corpus.sentences.len()))
}

// 4 --------------------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 0..100 {
        for case in common::op_cases(seed) {
            let e = check_op(&case.op, &case.inputs, 1e-6, seed).map_err(err)?.max_relative_error();
            let w = worst.entry(case.name).or_insert(0.0);
            *w = w.max(e);
        }
    }
    let (op, max) = worst.iter().fold(("", 0.0f64), |a, (k, &v)| if v > a.1 { (*k, v) } else { a });
    ensure(max < 1e-6, format!("{op}: max relative error {max:e}"))?;
    Ok(format!("{} ops x 100 instances, worst {op} {max:.2e}", worst.len()))
}

// 5 --------------------------------------------------------------------------

fn hvp_correctness() -> Outcome {
    let model = micro_model(13);
    let n = model.num_params();
    ensure(n <= 500, format!("{n} parameters"))?;
    let batch = random_batch(model.vocab_size(), 4, 13);
    let h = explicit_hessian(&model, &batch, 1e-5);
    let mut oracle = ModelOracle::new(&model, &batch, None, None).map_err(err)?;
    let mut r = rng(77);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let v = gaussian(&mut r, n);
        let got = oracle.apply(&v).map_err(err)?;
        worst = worst.max(rel_err(&got, &matvec(n, &h, &v)));
    }
    ensure(worst < 1e-4, format!("worst relative error {worst:e}"))?;
    Ok(format!("{n}-parameter model, 20 directions, worst {worst:.2e}"))
}

// 6 --------------------------------------------------------------------------

fn lanczos_accuracy() -> Outcome {
    let n = 50;
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let a = random_symmetric(n, 5000 + trial);
        let want = dense_eigenvalues(n, &a);
        let mut o = DenseOracle::new(n, a).map_err(err)?;
        let res = lanczos(&mut o, 5, n, trial).map_err(err)?;
        ensure(res.eigenvalues.len() == 5, format!("trial {trial}: {} values", res.eigenvalues.len()))?;
        for (g, w) in res.eigenvalues.iter().zip(&want) {
            worst = worst.max((g - w).abs() / w.abs());
        }
    }
    ensure(worst < 1e-8, format!("worst relative error {worst:e}"))?;
    Ok(format!("100 trials, top-5 worst relative error {worst:.2e}"))
}

// 7 --------------------------------------------------------------------------

fn hutchinson_unbiasedness() -> Outcome {
    let n = 100;
    let a = random_psd(n, 31);
    let exact: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let mut hits = 0;
    for seed in 0..100 {
        let mut o = DenseOracle::new(n, a.clone()).map_err(err)?;
        let t = hutchinson_trace(&mut o, 100, seed).map_err(err)?;
        hits += ((t.mean - exact).abs() <= 0.1 * exact) as usize;
    }
    ensure(hits >= 95, format!("{hits}/100 within 10%"))?;
    Ok(format!("{hits}/100 seeds within 10% of trace {exact:.3}"))
}

// 8 --------------------------------------------------------------------------

fn twonn_sanity() -> Outcome {
    let cloud = |rows: &[Vec<f64>]| PointCloud::from_rows(rows).map_err(err);
    let line_rows = circle(2000, 10, 1);
    let surf_rows = sphere(2000, 10, 2);
    let line = twonn_estimate(&cloud(&line_rows)?, DEFAULT_DISCARD).map_err(err)?;
    let surf = twonn_estimate(&cloud(&surf_rows)?, DEFAULT_DISCARD).map_err(err)?;
    ensure((0.9..=1.2).contains(&line), format!("1-manifold {line:.4}"))?;
    ensure((1.8..=2.3).contains(&surf), format!("2-manifold {surf:.4}"))?;
    let q = random_rotation(10, 3);
    let mut drift = 0.0f64;
    for (rows, base) in [(&line_rows, line), (&surf_rows, surf)] {
        for scale in [1.0, 0.01, 37.0] {
            let moved = twonn_estimate(&cloud(&transform(rows, &q, scale))?, DEFAULT_DISCARD).map_err(err)?;
            drift = drift.max((moved - base).abs());
        }
    }
    ensure(drift < 1e-3, format!("rotation/scale drift {drift:e}"))?;
    let mut gap = 0.0f64;
    for (rows, est) in [(&line_rows, line), (&surf_rows, surf)] {
        let o = twonn_oracle(rows, DEFAULT_DISCARD);
        gap = gap.max((o - est).abs() / o);
    }
    ensure(gap <= 1e-12, format!("oracle gap {gap:e}"))?;
    Ok(format!("circle {line:.4}, sphere {surf:.4}, invariance drift {drift:.1e}, oracle gap {gap:.1e}"))
}

// 9 --------------------------------------------------------------------------

fn probe_sanity() -> Outcome {
    let set = LabelSet::Pos;
    let k = set.labels().len();
    let d = 16;
    let (features, labels) = common::oracles::blobs(k, d, 40, 5.0, 0.3, 9);
    ensure(common::oracles::perceptron_separable(&features, &labels, d, k, 1000), "blobs not separable")?;
    let ds = ProbeDataset {
        layer: 0,
        stack: DECODER_STACK.into(),
        label_set: set,
        label_names: set.labels(),
        dim: d,
        features,
        labels,
    };
    let (probe, _) = fit_probe(&ds, 300, 1.0, 1).map_err(err)?;
    let rep = probe_confidence(&probe, &ds, 0).map_err(err)?;
    let correct: f64 = rep.labels.iter().map(|s| s.accuracy.unwrap_or(0.0) * s.count as f64).sum();
    let acc = correct / ds.len() as f64;
    ensure(acc == 1.0, format!("blob accuracy {acc}"))?;
    let uniform = probe_confidence(&ProbeModel::uniform(0, set, d), &ds, 0).map_err(err)?;
    ensure(
        uniform.labels.iter().all(|s| s.confidence == Some(1.0 / k as f64)),
        "uniform confidence differs from 1/K",
    )?;
    let scripted: [Scripted; 4] = [
        (&[(500, 0.2), (1000, 0.85), (1500, 0.9), (2000, 0.92)], 0.8, 2, Some(1000)),
        (&[(1000, 0.9), (1500, 0.4), (2000, 0.9), (2500, 0.95)], 0.8, 2, Some(2000)),
        (&[(500, 0.5), (1000, 0.55)], 0.6, 2, None),
        (&[(500, 0.61), (1000, 0.59), (1500, 0.7)], 0.6, 1, Some(500)),
    ];
    for (series, thr, pat, want) in scripted {
        let got = emergence_step(series, thr, pat);
        ensure(got == want, format!("emergence {got:?} vs {want:?} on {series:?}"))?;
    }
    Ok(format!("blob accuracy 1.0, uniform confidence 1/{k}, {} scripted series", scripted.len()))
}

// 10 / 11 --------------------------------------------------------------------

const SMOKE_STEPS: u64 = 1000;
const EXTENDED_STEPS: u64 = 5000;
const INTERVAL: u64 = 500;

fn smoke_model() -> TransformerConfig {
    TransformerConfig {
        d_model: 96,
        num_heads: 3,
        num_decoder_layers: 2,
        d_ff: 384,
        max_seq_length: 16,
        dropout: 0.1,
        ..TransformerConfig::default()
    }
}

fn smoke_config(seed: u64, full_analysis: bool) -> TrainingConfig {
    let base = TrainingConfig {
        epochs: usize::MAX,
        max_steps: Some(EXTENDED_STEPS),
        batch_size: 128,
        learning_rate: 1e-3,
        track_interval: INTERVAL,
        seed,
        precision: Precision::F32,
        track_component_hessian: false,
        ..TrainingConfig::default()
    };
    if full_analysis {
        base
    } else {
        TrainingConfig {
            track_hessian: false,
            track_gradient_alignment: false,
            track_linguistic_probes: false,
            track_intrinsic_dimensions: false,
            track_pos_performance: false,
            track_semantic_roles_performance: false,
            track_semantic_probes: true,
            ..base
        }
    }
}

/// Records the wall-clock time of every event.
#[derive(Clone, Default)]
struct Clock {
    start: Option<Instant>,
    marks: std::rc::Rc<std::cell::RefCell<Vec<(u64, Duration)>>>,
}

impl AnalysisHook for Clock {
    fn name(&self) -> &str {
        "clock"
    }

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> trace_core::Result<()> {
        let start = *self.start.get_or_insert_with(Instant::now);
        self.marks.borrow_mut().push((event.step, start.elapsed()));
        Ok(())
    }

    fn outputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
}

struct SmokeRun {
    dir: PathBuf,
    report: TrainReport,
    elapsed: Duration,
    marks: Vec<(u64, Duration)>,
}

fn smoke_corpus() -> Result<trace_core::corpusgen::Corpus, String> {
    CorpusConfig::default().generate(Some(5000), Some(42)).map_err(err)
}

fn train_smoke(root: &Path, seed: u64, full: bool) -> Result<SmokeRun, String> {
    let corpus = smoke_corpus()?;
    let dir = root.join(format!("seed{seed}"));
    let cfg = smoke_config(seed, full);
    let tok = Tokenizer::build(&corpus.sentences).map_err(err)?;
    let mut model = DecoderModel::new(smoke_model(), tok.len(), seed).map_err(err)?.with_precision(cfg.precision);
    model.round_to_precision();
    let clock = Clock {
        start: Some(Instant::now()),
        ..Clock::default()
    };
    let mut trainer = Trainer::new(cfg.clone()).map_err(err)?;
    for h in default_hooks(&cfg, &model, &dir).map_err(err)? {
        trainer = trainer.with_hook(h);
    }
    trainer = trainer.with_hook(Box::new(clock.clone()));
    let t0 = Instant::now();
    let report = trainer
        .train(&mut model, &tok, &corpus.sentences, &dir, serde_json::json!({"corpus": corpus.metadata}))
        .map_err(err)?;
    let marks = clock.marks.borrow().clone();
    Ok(SmokeRun {
        dir,
        report,
        elapsed: t0.elapsed(),
        marks,
    })
}

fn read_losses(dir: &Path) -> Result<Vec<f64>, String> {
    let text = fs::read_to_string(dir.join("metrics/train_loss.csv")).map_err(err)?;
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()).ok_or(format!("bad loss row {l}")))
        .collect()
}

/// Checks that every metric CSV has at least one non-empty value at each
/// event step.
fn csvs_populated(dir: &Path, events: &[u64]) -> Result<usize, String> {
    let mut checked = 0;
    for entry in fs::read_dir(dir.join("metrics")).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name == "val.csv" {
            ensure(fs::read_to_string(&path).map_err(err)?.lines().count() > 1, "val.csv is empty")?;
            checked += 1;
            continue;
        }
        let text = fs::read_to_string(&path).map_err(err)?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let skip: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| ["step", "split", "component", "layer", "label", "tag", "role", "method", "count"].contains(h))
            .map(|(i, _)| i)
            .collect();
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        for &e in events {
            let es = e.to_string();
            let filled = rows
                .iter()
                .filter(|r| r[0] == es)
                .any(|r| r.iter().enumerate().any(|(i, v)| !skip.contains(&i) && !v.is_empty()));
            ensure(filled, format!("{name} has no values at step {e}"))?;
        }
        checked += 1;
    }
    Ok(checked)
}

fn smoke_checks(run: &SmokeRun) -> Outcome {
    let losses = read_losses(&run.dir)?;
    ensure(losses.len() as u64 >= SMOKE_STEPS, "fewer than 1000 logged steps")?;
    let initial = losses[0];
    let at = &losses[SMOKE_STEPS as usize - 20..SMOKE_STEPS as usize];
    let final_loss = at.iter().sum::<f64>() / at.len() as f64;
    ensure(final_loss < 0.6 * initial, format!("loss {initial:.4} -> {final_loss:.4} is not below 60%"))?;

    let ckpt = load_checkpoint(&run.dir.join(format!("checkpoints/step_{SMOKE_STEPS}.ckpt"))).map_err(err)?;
    let corpus = smoke_corpus()?;
    let split = Split::new(corpus.sentences.len(), 0.1, run.report_seed()).map_err(err)?;
    let val = fixed_batches(&ckpt.tokenizer, &corpus.sentences, &split.val, 256, 16).map_err(err)?;
    let m = evaluate(&ckpt.model, &val).map_err(err)?;
    let uniform = 1.0 / ckpt.model.vocab_size() as f64;
    ensure(m.accuracy > 5.0 * uniform, format!("accuracy {:.4} vs 5x uniform {:.4}", m.accuracy, 5.0 * uniform))?;

    let smoke_events: Vec<u64> = run.report.events.iter().copied().filter(|&e| e <= SMOKE_STEPS).collect();
    ensure(smoke_events == [500, 1000], format!("events {smoke_events:?}"))?;
    let files = csvs_populated(&run.dir, &smoke_events)?;
    let at_1000 = run
        .marks
        .iter()
        .find(|(s, _)| *s == SMOKE_STEPS)
        .map(|m| m.1)
        .ok_or("no event at step 1000")?;
    ensure(at_1000 < Duration::from_secs(15 * 60), format!("1000 steps took {at_1000:?}"))?;
    Ok(format!(
        "loss {initial:.3} -> {final_loss:.3} ({:.0}%), val accuracy {:.3} = {:.1}x uniform, {files} CSVs populated at 500/1000, {at_1000:.0?} to step 1000",
        100.0 * final_loss / initial,
        m.accuracy,
        m.accuracy / uniform
    ))
}

impl SmokeRun {
    fn report_seed(&self) -> u64 {
        let text = fs::read_to_string(self.dir.join("config.json")).unwrap_or_default();
        serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v["training"]["seed"].as_u64())
            .unwrap_or(0)
    }
}

/// Emergence steps of Agent, Action and Location on the top decoder layer.
fn emergence_of(run: &SmokeRun) -> Result<[Option<u64>; 3], String> {
    let layer = format!("{DECODER_STACK}{}", smoke_model().num_decoder_layers - 1);
    let s = run.report.hook_summaries.get("probes_roles").ok_or("no role probe summary")?;
    let get = |label: &str| s[&layer][label]["emergence_step"].as_u64();
    Ok([get("Agent"), get("Action"), get("Location")])
}

fn emergence_holds([agent, action, location]: [Option<u64>; 3]) -> bool {
    match location {
        None => true,
        Some(loc) => [agent, action].into_iter().flatten().any(|c| c <= loc),
    }
}

// 12 -------------------------------------------------------------------------

fn determinism(root: &Path) -> Outcome {
    let cfg = CorpusConfig::default();
    let a = corpus_to_json(&cfg.generate(Some(800), Some(3)).map_err(err)?, true).map_err(err)?;
    let b = corpus_to_json(&cfg.generate(Some(800), Some(3)).map_err(err)?, true).map_err(err)?;
    ensure(a == b, "corpus bytes differ")?;
    let corpus = corpus_from_json(&a).map_err(err)?;
    let model_cfg = TransformerConfig {
        d_model: 16,
        num_heads: 2,
        d_ff: 32,
        ..smoke_model()
    };
    let train_cfg = TrainingConfig {
        epochs: usize::MAX,
        max_steps: Some(60),
        batch_size: 32,
        track_interval: 20,
        precision: Precision::F64,
        track_hessian: false,
        track_gradient_alignment: false,
        track_component_hessian: false,
        probe_epochs: 50,
        analysis_sentences: 80,
        ..TrainingConfig::default()
    };
    let mut svgs = Vec::new();
    let mut losses = Vec::new();
    for name in ["a", "b"] {
        let dir = root.join(name);
        let report = trace_core::trainer::run_training(&corpus, &model_cfg, &train_cfg, &dir).map_err(err)?;
        ensure(report.steps == 60, "short run")?;
        losses.push(fs::read(dir.join("metrics/train_loss.csv")).map_err(err)?);
        let charts = render_run(&dir).map_err(err)?.charts;
        let mut bytes = BTreeMap::new();
        for c in charts {
            bytes.insert(c.file_name().unwrap().to_owned(), fs::read(&c).map_err(err)?);
        }
        svgs.push(bytes);
    }
    ensure(losses[0] == losses[1], "loss CSVs differ")?;
    ensure(svgs[0] == svgs[1], "SVG bytes differ")?;
    Ok(format!("corpus, 64-bit loss CSV and {} SVGs byte-identical", svgs[0].len()))
}

// 13 -------------------------------------------------------------------------

fn paper_scale() -> Outcome {
    let corpus = CorpusConfig::default().generate(Some(25_000), None).map_err(err)?;
    let s = &corpus.statistics;
    ensure((500..=928).contains(&s.base_types), format!("{} base types", s.base_types))?;
    ensure((3.5..=6.0).contains(&s.mean_length), format!("mean length {}", s.mean_length))?;
    Ok(format!(
        "{} base types ({} surface types), mean length {:.4}",
        s.base_types, s.vocabulary_size, s.mean_length
    ))
}

// ----------------------------------------------------------------------------

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let out = f();
        let el = t0.elapsed();
        let (tag, msg) = match &out {
            Ok(m) => ("PASS", m.clone()),
            Err(m) => ("FAIL", m.clone()),
        };
        println!("{tag} [{n:2}] {name}: {msg} ({el:.1?})");
        results.push((n, name, out, el));
    };

    let simple: [Criterion; 9] = [
        (1, "zipfian compliance", zipf_compliance),
        (2, "corpus distribution fidelity", distribution_fidelity),
        (3, "annotation consistency", annotation_consistency),
        (4, "gradient correctness", gradient_correctness),
        (5, "hvp correctness", hvp_correctness),
        (6, "lanczos accuracy", lanczos_accuracy),
        (7, "hutchinson unbiasedness", hutchinson_unbiasedness),
        (8, "twonn sanity", twonn_sanity),
        (9, "probe sanity", probe_sanity),
    ];
    for (n, name, f) in simple {
        if on(n) {
            record(n, name, &mut || f());
        }
    }

    if on(10) || on(11) {
        let first = train_smoke(tmp.path(), 1, true);
        if let Ok(r) = &first {
            println!(
                "      seed 1: {} steps in {:.0?}, events {:?}",
                r.report.steps, r.elapsed, r.report.events
            );
        }
        if on(10) {
            record(10, "end-to-end smoke", &mut || {
                let r = first.as_ref().map_err(Clone::clone)?;
                let msg = smoke_checks(r)?;
                let n = csvs_populated(&r.dir, &r.report.events)?;
                Ok(format!("{msg}; {n} CSVs populated at all {} events of the extension", r.report.events.len()))
            });
        }
        if on(11) {
            record(11, "qualitative emergence", &mut || {
                let mut runs = vec![first.as_ref().map_err(Clone::clone).and_then(emergence_of)?];
                for seed in [2, 3] {
                    let r = train_smoke(tmp.path(), seed, false)?;
                    runs.push(emergence_of(&r)?);
                }
                let holds = runs.iter().filter(|e| emergence_holds(**e)).count();
                let detail: Vec<String> = runs
                    .iter()
                    .zip(1..)
                    .map(|(e, s)| format!("seed {s}: Agent {:?} Action {:?} Location {:?}", e[0], e[1], e[2]))
                    .collect();
                ensure(holds >= 2, format!("holds in {holds}/3; {}", detail.join("; ")))?;
                Ok(format!("holds in {holds}/3; {}", detail.join("; ")))
            });
        }
    }
    if on(12) {
        record(12, "determinism", &mut || determinism(&tmp.path().join("det")));
    }
    if on(13) {
        record(13, "paper-scale bounds", &mut paper_scale);
    }

    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
