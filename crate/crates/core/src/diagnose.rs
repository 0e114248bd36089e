//! Output-level diagnostics: next-token accuracy stratified by the gold
//! token's POS tag and semantic role, and a three-way tally of how each
//! prediction relates to the gold token.
//!
//! Predictions are teacher-forced. The prediction at output position `t` is
//! scored against sentence token `t` (input position `t + 1`); the final EOS
//! target carries no annotation and is not evaluated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpusgen::{AnnotatedSentence, Category, PosTag, Role};
use crate::model::{Batch, DecoderModel, Tokenizer, SPECIALS};
use crate::report::{fmt_num, CsvLog};
use crate::tensor::Tensor;
use crate::trainer::{AnalysisEvent, AnalysisHook};
use crate::{Error, Result};

pub const SPECIAL: &str = "SPECIAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// `core` (Agent, Patient, Action) versus `adjunct` (every other role).
    Coarse,
    #[default]
    Detailed,
}

impl Granularity {
    pub fn stratum(self, role: Role) -> &'static str {
        match self {
            Granularity::Detailed => role.as_str(),
            Granularity::Coarse if role.is_core() => "core",
            Granularity::Coarse => "adjunct",
        }
    }

    pub fn strata(self) -> Vec<&'static str> {
        match self {
            Granularity::Detailed => Role::ALL.iter().map(|r| r.as_str()).collect(),
            Granularity::Coarse => vec!["core", "adjunct"],
        }
    }
}

/// Lexical category of a token name: the longest prefix of ASCII letters and
/// underscores (`noun139` → `noun`, `transitive_verb8s` → `transitive_verb`).
/// Special tokens map to [`SPECIAL`].
pub fn token_category(token: &str) -> &str {
    if SPECIALS.contains(&token) {
        return SPECIAL;
    }
    let end = token
        .find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))
        .unwrap_or(token.len());
    &token[..end]
}

/// Coarse POS of a token via its lexical category, if it has one.
pub fn token_pos(token: &str) -> Option<PosTag> {
    token_category(token).parse::<Category>().ok().map(Category::pos_tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Misalignment {
    Exact,
    TypeCorrectTokenWrong,
    TypeWrong,
}

pub fn classify_prediction(pred: &str, gold: &str) -> Misalignment {
    if pred == gold {
        Misalignment::Exact
    } else if token_category(pred) == token_category(gold) {
        Misalignment::TypeCorrectTokenWrong
    } else {
        Misalignment::TypeWrong
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Stratum {
    pub correct: usize,
    pub count: usize,
}

impl Stratum {
    fn add(&mut self, hit: bool) {
        self.count += 1;
        self.correct += hit as usize;
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MisalignmentCounts {
    pub exact: usize,
    pub type_correct_token_wrong: usize,
    pub type_wrong: usize,
}

impl MisalignmentCounts {
    pub fn total(&self) -> usize {
        self.exact + self.type_correct_token_wrong + self.type_wrong
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedReport {
    pub step: u64,
    pub granularity: Granularity,
    pub pos: BTreeMap<String, Stratum>,
    pub roles: BTreeMap<String, Stratum>,
    pub misalignment: MisalignmentCounts,
    pub evaluated: usize,
}

/// Argmax over the last axis of `[B, L, V]` logits, row-major over `B×L`.
pub fn argmax_predictions(logits: &Tensor<f64>) -> Vec<usize> {
    let v = *logits.shape().last().expect("logits have a vocabulary axis");
    logits
        .data()
        .chunks_exact(v)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
                .0
        })
        .collect()
}

/// Scores precomputed predictions (one `B×L` vector per batch) against the
/// annotations of `sentences`, which `sentence_ids` in each batch index.
pub fn stratify(
    predictions: &[Vec<usize>],
    batches: &[Batch],
    sentences: &[AnnotatedSentence],
    tokenizer: &Tokenizer,
    granularity: Granularity,
    step: u64,
) -> Result<StratifiedReport> {
    let mut report = StratifiedReport {
        step,
        granularity,
        pos: PosTag::ALL.iter().map(|t| (t.as_str().to_string(), Stratum::default())).collect(),
        roles: granularity.strata().into_iter().map(|s| (s.to_string(), Stratum::default())).collect(),
        misalignment: MisalignmentCounts::default(),
        evaluated: 0,
    };
    for (b, preds) in batches.iter().zip(predictions) {
        for r in 0..b.rows {
            let si = b.sentence_ids[r];
            let s = sentences
                .get(si)
                .ok_or_else(|| Error::Data(format!("sentence {si}: index outside the annotation set")))?;
            if s.pos_tags.len() != s.tokens.len() || b.lengths[r] != s.tokens.len() {
                return Err(Error::Data(format!("sentence {si}: annotations do not align with batch positions")));
            }
            for (t, gold) in s.tokens.iter().enumerate() {
                if b.targets[r * b.len + t] != tokenizer.id(gold) {
                    return Err(Error::Data(format!(
                        "sentence {si}: target at position {t} is not the annotated token {gold:?}"
                    )));
                }
                let pred = tokenizer.token(preds[r * b.len + t]);
                let hit = pred == gold;
                report.pos.entry(s.pos_tags[t].as_str().to_string()).or_default().add(hit);
                if let Some(role) = s.role_at(t) {
                    report.roles.entry(granularity.stratum(role).to_string()).or_default().add(hit);
                }
                match classify_prediction(pred, gold) {
                    Misalignment::Exact => report.misalignment.exact += 1,
                    Misalignment::TypeCorrectTokenWrong => report.misalignment.type_correct_token_wrong += 1,
                    Misalignment::TypeWrong => report.misalignment.type_wrong += 1,
                }
                report.evaluated += 1;
            }
        }
    }
    Ok(report)
}

/// Runs `model` over `batches` and stratifies its argmax predictions.
pub fn stratified_accuracy(
    model: &DecoderModel,
    batches: &[Batch],
    sentences: &[AnnotatedSentence],
    tokenizer: &Tokenizer,
    granularity: Granularity,
    step: u64,
) -> Result<StratifiedReport> {
    let preds = batches
        .iter()
        .map(|b| Ok(argmax_predictions(&model.infer(&b.inputs, b.rows, b.len)?.logits)))
        .collect::<Result<Vec<_>>>()?;
    stratify(&preds, batches, sentences, tokenizer, granularity, step)
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Coarse => "coarse",
            Granularity::Detailed => "detailed",
        })
    }
}

/// Writes `pos_accuracy.csv`, `role_accuracy.csv` (each when enabled) and
/// `misalignment.csv` under `metrics/`.
pub struct DiagnoseHook {
    granularity: Granularity,
    pos_log: Option<CsvLog>,
    role_log: Option<CsvLog>,
    mis_log: CsvLog,
    latest: Option<StratifiedReport>,
}

impl DiagnoseHook {
    pub fn new(run_dir: &Path, pos: bool, roles: bool, granularity: Granularity) -> Result<DiagnoseHook> {
        let m = run_dir.join("metrics");
        let pos_log = pos
            .then(|| CsvLog::create(&m.join("pos_accuracy.csv"), &["step", "tag", "accuracy", "count"]))
            .transpose()?;
        let role_log = roles
            .then(|| CsvLog::create(&m.join("role_accuracy.csv"), &["step", "role", "accuracy", "count"]))
            .transpose()?;
        let mis_log = CsvLog::create(
            &m.join("misalignment.csv"),
            &["step", "exact", "type_correct_token_wrong", "type_wrong"],
        )?;
        Ok(DiagnoseHook {
            granularity,
            pos_log,
            role_log,
            mis_log,
            latest: None,
        })
    }
}

fn strata_rows(step: u64, strata: &BTreeMap<String, Stratum>, order: &[&str]) -> Vec<[String; 4]> {
    order
        .iter()
        .map(|&k| {
            let s = strata.get(k).copied().unwrap_or_default();
            [step.to_string(), k.to_string(), fmt_num(s.accuracy()), s.count.to_string()]
        })
        .collect()
}

impl AnalysisHook for DiagnoseHook {
    fn name(&self) -> &str {
        "diagnose"
    }

    fn on_event(&mut self, event: &AnalysisEvent<'_>) -> Result<()> {
        let acts = event.activations()?;
        let preds: Vec<Vec<usize>> = acts.batches.iter().map(|o| argmax_predictions(&o.logits)).collect();
        let d = event.data;
        let report = stratify(&preds, &d.batches, &d.sentences, &d.tokenizer, self.granularity, event.step)?;
        if let Some(log) = &mut self.pos_log {
            let order: Vec<&str> = PosTag::ALL.iter().map(|t| t.as_str()).collect();
            log.append_all(&strata_rows(event.step, &report.pos, &order))?;
        }
        if let Some(log) = &mut self.role_log {
            log.append_all(&strata_rows(event.step, &report.roles, &self.granularity.strata()))?;
        }
        let m = report.misalignment;
        self.mis_log.append(&[
            event.step.to_string(),
            m.exact.to_string(),
            m.type_correct_token_wrong.to_string(),
            m.type_wrong.to_string(),
        ])?;
        self.latest = Some(report);
        Ok(())
    }

    fn outputs(&self) -> Vec<PathBuf> {
        [&self.pos_log, &self.role_log]
            .into_iter()
            .flatten()
            .chain([&self.mis_log])
            .map(|l| l.path().to_path_buf())
            .collect()
    }

    fn summary(&self) -> Value {
        json!(self.latest)
    }
}
