use super::tokenizer::{Tokenizer, BOS, EOS, PAD};
use crate::corpusgen::AnnotatedSentence;
use crate::tensor::TensorError;

/// Right-padded next-token batch. Row `r` holds `BOS t0 .. t(n-1)` as input
/// and `t0 .. t(n-1) EOS` as target; padding targets are `PAD` and ignored by
/// the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub rows: usize,
    pub len: usize,
    /// Index of each row's sentence in the source slice.
    pub sentence_ids: Vec<usize>,
    /// Number of corpus tokens per row (excluding BOS/EOS).
    pub lengths: Vec<usize>,
}

impl Batch {
    pub fn from_sentences(
        tokenizer: &Tokenizer,
        sentences: &[AnnotatedSentence],
        indices: &[usize],
        max_len: usize,
    ) -> Result<Batch, TensorError> {
        let len = indices
            .iter()
            .map(|&i| sentences[i].len() + 1)
            .max()
            .unwrap_or(1);
        if len > max_len {
            return Err(TensorError::Invalid {
                op: "batch",
                msg: format!("sequence length {len} exceeds max_seq_length {max_len}"),
            });
        }
        let rows = indices.len();
        let mut inputs = vec![PAD; rows * len];
        let mut targets = vec![PAD; rows * len];
        let mut lengths = Vec::with_capacity(rows);
        for (r, &i) in indices.iter().enumerate() {
            let ids = tokenizer.encode(&sentences[i].tokens);
            let row = &mut inputs[r * len..(r + 1) * len];
            row[0] = BOS;
            row[1..=ids.len()].copy_from_slice(&ids);
            let row = &mut targets[r * len..(r + 1) * len];
            row[..ids.len()].copy_from_slice(&ids);
            row[ids.len()] = EOS;
            lengths.push(ids.len());
        }
        Ok(Batch {
            inputs,
            targets,
            rows,
            len,
            sentence_ids: indices.to_vec(),
            lengths,
        })
    }

    /// Count of non-padding target positions.
    pub fn num_targets(&self) -> usize {
        self.targets.iter().filter(|&&t| t != PAD).count()
    }
}
