use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpusgen::{AnnotatedSentence, PosTag, Role};
use crate::model::{Batch, DecoderModel, Inference, Tokenizer};
use crate::trainer::{fixed_batches, Activations};
use crate::{Error, Result};

pub const NONE_LABEL: &str = "NONE";
pub const DECODER_STACK: &str = "decoder";

/// Which annotation a probe decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSet {
    Pos,
    Roles,
}

impl LabelSet {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSet::Pos => "pos",
            LabelSet::Roles => "roles",
        }
    }

    /// POS tags in tag order, or the semantic roles followed by `NONE`.
    pub fn labels(self) -> Vec<String> {
        match self {
            LabelSet::Pos => PosTag::ALL.iter().map(|t| t.as_str().to_string()).collect(),
            LabelSet::Roles => Role::ALL
                .iter()
                .map(|r| r.as_str().to_string())
                .chain([NONE_LABEL.to_string()])
                .collect(),
        }
    }

    /// Label index of token `index` in `sentence`.
    pub fn label_of(self, sentence: &AnnotatedSentence, index: usize) -> usize {
        match self {
            LabelSet::Pos => PosTag::ALL
                .iter()
                .position(|&t| t == sentence.pos_tags[index])
                .expect("every tag is listed"),
            LabelSet::Roles => match sentence.role_at(index) {
                Some(r) => Role::ALL.iter().position(|&x| x == r).expect("every role is listed"),
                None => Role::ALL.len(),
            },
        }
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hidden states at every token position of a set of batches. Row `i` is the
/// state at the input position holding token `token[i]` of sentence
/// `sentence[i]` (input position `token[i] + 1`, after BOS).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenRows {
    pub dim: usize,
    pub features: Vec<f64>,
    pub sentence: Vec<usize>,
    pub token: Vec<usize>,
}

impl HiddenRows {
    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Gathers the layer-`layer` states of all non-padding token positions.
pub fn hidden_rows(batches: &[Batch], outputs: &[Inference], layer: usize) -> Result<HiddenRows> {
    let layers = outputs.first().map_or(0, |o| o.hidden.len());
    if layer >= layers {
        return Err(Error::Usage(format!("layer {layer} out of range: model has {layers} layers")));
    }
    let dim = outputs[0].hidden[layer].shape()[2];
    let mut rows = HiddenRows {
        dim,
        features: Vec::new(),
        sentence: Vec::new(),
        token: Vec::new(),
    };
    for (b, out) in batches.iter().zip(outputs) {
        let h = out.hidden[layer].data();
        for r in 0..b.rows {
            for p in 1..=b.lengths[r] {
                let at = (r * b.len + p) * dim;
                rows.features.extend_from_slice(&h[at..at + dim]);
                rows.sentence.push(b.sentence_ids[r]);
                rows.token.push(p - 1);
            }
        }
    }
    Ok(rows)
}

/// Feature rows with integer labels into `label_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub layer: usize,
    pub stack: String,
    pub label_set: LabelSet,
    pub label_names: Vec<String>,
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ProbeDataset {
    /// Labels `rows` with `label_set`, keeping rows whose sentence passes
    /// `keep`.
    pub fn from_rows(
        rows: &HiddenRows,
        sentences: &[AnnotatedSentence],
        layer: usize,
        label_set: LabelSet,
        keep: impl Fn(usize) -> bool,
    ) -> ProbeDataset {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..rows.len() {
            let s = rows.sentence[i];
            if keep(s) {
                features.extend_from_slice(rows.row(i));
                labels.push(label_set.label_of(&sentences[s], rows.token[i]));
            }
        }
        ProbeDataset {
            layer,
            stack: DECODER_STACK.to_string(),
            label_set,
            label_names: label_set.labels(),
            dim: rows.dim,
            features,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    /// Rows in the given order (repeats allowed).
    pub fn select(&self, order: &[usize]) -> ProbeDataset {
        ProbeDataset {
            features: order.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            stack: self.stack.clone(),
            ..*self
        }
    }
}

/// Runs `model` over `sentences` and labels the layer-`layer` states.
pub fn collect_probe_dataset(
    model: &DecoderModel,
    tokenizer: &Tokenizer,
    sentences: &[AnnotatedSentence],
    layer: usize,
    label_set: LabelSet,
) -> Result<ProbeDataset> {
    let layers = model.config().num_decoder_layers;
    if layer >= layers {
        return Err(Error::Usage(format!("layer {layer} out of range: model has {layers} layers")));
    }
    let idx: Vec<usize> = (0..sentences.len()).collect();
    let batches = fixed_batches(tokenizer, sentences, &idx, 64, model.config().max_seq_length)?;
    let acts = Activations::compute(model, &batches)?;
    let rows = hidden_rows(&batches, &acts.batches, layer)?;
    Ok(ProbeDataset::from_rows(&rows, sentences, layer, label_set, |_| true))
}
