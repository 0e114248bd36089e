use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainingConfig;
use crate::corpusgen::AnnotatedSentence;
use crate::model::{mix, Batch, Tokenizer};
use crate::{Error, Result};

const SPLIT_SITE: u64 = 0x5eed_0001;
const EPOCH_SITE: u64 = 0x5eed_0002;
const ANALYSIS_BATCH: usize = 64;

/// Seeded train/validation partition of sentence indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    /// Shuffles `0..n` and holds out `round(n * val_fraction)` indices (at
    /// least one when the fraction is positive and `n >= 2`).
    pub fn new(n: usize, val_fraction: f64, seed: u64) -> Result<Split> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, SPLIT_SITE)));
        let mut n_val = (n as f64 * val_fraction).round() as usize;
        if val_fraction > 0.0 && n >= 2 {
            n_val = n_val.clamp(1, n - 1);
        }
        let train = idx.split_off(n_val);
        if train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }
        Ok(Split { train, val: idx })
    }
}

/// Reshuffles the training indices every epoch and cuts them into batches.
#[derive(Debug, Clone)]
pub struct Loader {
    indices: Vec<usize>,
    batch_size: usize,
    seed: u64,
}

impl Loader {
    pub fn new(indices: Vec<usize>, batch_size: usize, seed: u64) -> Result<Loader> {
        if indices.is_empty() {
            return Err(Error::Config("data loader is empty".into()));
        }
        Ok(Loader {
            indices,
            batch_size,
            seed,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.indices.len().div_ceil(self.batch_size)
    }

    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut idx = self.indices.clone();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(mix(self.seed, EPOCH_SITE), epoch)));
        idx.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

/// Builds contiguous batches over `indices` without shuffling.
pub fn fixed_batches(
    tokenizer: &Tokenizer,
    sentences: &[AnnotatedSentence],
    indices: &[usize],
    batch_size: usize,
    max_len: usize,
) -> Result<Vec<Batch>> {
    indices
        .chunks(batch_size.max(1))
        .map(|c| Batch::from_sentences(tokenizer, sentences, c, max_len).map_err(Error::from))
        .collect()
}

/// Everything analysis modules need besides the parameter snapshot. Built
/// once per run so every event looks at the same sentences.
#[derive(Debug, Clone)]
pub struct AnalysisData {
    pub tokenizer: Tokenizer,
    /// Held-out sentences used by probes, ID estimation and diagnostics.
    pub sentences: Vec<AnnotatedSentence>,
    /// Unshuffled batches over `sentences`; `sentence_ids` index `sentences`.
    pub batches: Vec<Batch>,
    /// Probe fitting and scoring partitions of `sentences` (75/25).
    pub probe_train: Vec<usize>,
    pub probe_eval: Vec<usize>,
    pub curvature_train: Batch,
    pub curvature_val: Option<Batch>,
    pub seed: u64,
}

impl AnalysisData {
    pub fn build(
        tokenizer: &Tokenizer,
        sentences: &[AnnotatedSentence],
        split: &Split,
        config: &TrainingConfig,
        max_len: usize,
    ) -> Result<AnalysisData> {
        let pool = if split.val.is_empty() { &split.train } else { &split.val };
        let chosen: Vec<AnnotatedSentence> = pool
            .iter()
            .take(config.analysis_sentences.max(1))
            .map(|&i| sentences[i].clone())
            .collect();
        let local: Vec<usize> = (0..chosen.len()).collect();
        let batches = fixed_batches(tokenizer, &chosen, &local, ANALYSIS_BATCH, max_len)?;
        let cut = (chosen.len() * 3).div_ceil(4).min(chosen.len());
        let take = |ix: &[usize]| -> Vec<usize> {
            ix.iter().copied().take(config.curvature_batch_size).collect()
        };
        let curvature_train = Batch::from_sentences(tokenizer, sentences, &take(&split.train), max_len)?;
        let curvature_val = if split.val.is_empty() {
            None
        } else {
            Some(Batch::from_sentences(tokenizer, sentences, &take(&split.val), max_len)?)
        };
        Ok(AnalysisData {
            tokenizer: tokenizer.clone(),
            sentences: chosen,
            batches,
            probe_train: local[..cut].to_vec(),
            probe_eval: local[cut..].to_vec(),
            curvature_train,
            curvature_val,
            seed: config.seed,
        })
    }
}
