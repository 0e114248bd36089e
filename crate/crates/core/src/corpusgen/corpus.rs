use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frames::{Complexity, Role, SemanticFrame};
use super::lexicon::{Lexicon, LexiconParams, VocabularySpec};
use super::sentence::{generate_sentence, AnnotatedSentence};
use crate::{Error, Result};

pub const GENERATOR_VERSION: &str = concat!("trace-corpusgen ", env!("CARGO_PKG_VERSION"));
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub complexity: BTreeMap<Complexity, f64>,
    pub semantic_frame: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub seed: u64,
    pub distributions: Distributions,
    pub generator_version: String,
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<VocabularySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<LexiconParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_sentences: usize,
    /// Distinct surface tokens, counting inflected verbs separately.
    pub vocabulary_size: usize,
    /// Distinct lexicon entries after stripping the verb suffix.
    pub base_types: usize,
    pub mean_length: f64,
    pub mean_entropy: f64,
    pub role_frequencies: BTreeMap<Role, usize>,
    pub complexity_counts: BTreeMap<Complexity, usize>,
    pub frame_counts: BTreeMap<String, usize>,
    pub length_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub metadata: GenerationMeta,
    pub statistics: CorpusStats,
    pub sentences: Vec<AnnotatedSentence>,
}

fn check_distribution<K: std::fmt::Display>(name: &str, dist: &BTreeMap<K, f64>) -> Result<()> {
    if let Some((k, v)) = dist.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Config(format!("{name} entry '{k}' has invalid weight {v}")));
    }
    let total: f64 = dist.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

/// Draws an index from `weights` (which sum to `total`) by inverse CDF.
fn pick<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Per-class frame tables: for every class with positive probability, the
/// frames of that class carrying positive weight, in name order.
struct FramePlan<'f> {
    classes: Vec<(Complexity, f64)>,
    frames: BTreeMap<Complexity, (Vec<&'f SemanticFrame>, Vec<f64>)>,
}

impl<'f> FramePlan<'f> {
    fn new(
        complexity_dist: &BTreeMap<Complexity, f64>,
        frame_dist: &BTreeMap<String, f64>,
        frames: &'f [SemanticFrame],
    ) -> Result<Self> {
        check_distribution("complexity distribution", complexity_dist)?;
        check_distribution("semantic frame distribution", frame_dist)?;
        let mut table: BTreeMap<Complexity, (Vec<&SemanticFrame>, Vec<f64>)> = BTreeMap::new();
        for (name, &w) in frame_dist {
            let frame = frames
                .iter()
                .find(|f| &f.name == name)
                .ok_or_else(|| Error::Config(format!("frame '{name}' is not registered")))?;
            if w > 0.0 {
                let entry = table.entry(frame.complexity).or_default();
                entry.0.push(frame);
                entry.1.push(w);
            }
        }
        let classes: Vec<_> = complexity_dist
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(&c, &p)| (c, p))
            .collect();
        for (c, p) in &classes {
            if !table.contains_key(c) {
                return Err(Error::Config(format!(
                    "complexity class '{c}' has probability {p} but no frame in the frame \
                     distribution belongs to it"
                )));
            }
        }
        Ok(FramePlan { classes, frames: table })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &'f SemanticFrame {
        let weights: Vec<f64> = self.classes.iter().map(|c| c.1).collect();
        let class = self.classes[pick(rng, &weights)].0;
        let (frames, w) = &self.frames[&class];
        frames[pick(rng, w)]
    }
}

/// Probability of each frame under class-then-frame sampling.
pub fn implied_frame_probabilities(
    complexity_dist: &BTreeMap<Complexity, f64>,
    frame_dist: &BTreeMap<String, f64>,
    frames: &[SemanticFrame],
) -> Result<BTreeMap<String, f64>> {
    let plan = FramePlan::new(complexity_dist, frame_dist, frames)?;
    let mut out = BTreeMap::new();
    for (c, p) in &plan.classes {
        let (fs, w) = &plan.frames[c];
        let total: f64 = w.iter().sum();
        for (f, wf) in fs.iter().zip(w) {
            *out.entry(f.name.clone()).or_insert(0.0) += p * wf / total;
        }
    }
    Ok(out)
}

/// RNG for sentence `index`: an independent ChaCha stream per sentence, so
/// any sentence can be regenerated in isolation.
pub fn sentence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn generate_corpus(
    n: usize,
    complexity_dist: &BTreeMap<Complexity, f64>,
    frame_dist: &BTreeMap<String, f64>,
    lexicon: &Lexicon,
    frames: &[SemanticFrame],
    seed: u64,
) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::Config("number of sentences must be at least 1".into()));
    }
    let plan = FramePlan::new(complexity_dist, frame_dist, frames)?;
    for fs in plan.frames.values() {
        for f in &fs.0 {
            f.validate(lexicon)?;
        }
    }
    let sentences = (0..n)
        .map(|i| {
            let mut rng = sentence_rng(seed, i);
            let frame = plan.sample(&mut rng);
            generate_sentence(frame, lexicon, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let statistics = corpus_stats(&sentences)?;
    Ok(Corpus {
        metadata: GenerationMeta {
            seed,
            distributions: Distributions {
                complexity: complexity_dist.clone(),
                semantic_frame: frame_dist.clone(),
            },
            generator_version: GENERATOR_VERSION.to_string(),
            schema_version: SCHEMA_VERSION,
            vocabulary: Some(lexicon.spec()),
            lexicon: Some(lexicon.params().clone()),
        },
        statistics,
        sentences,
    })
}

fn base_form(token: &str) -> &str {
    token.strip_suffix('s').unwrap_or(token)
}

pub fn corpus_stats(sentences: &[AnnotatedSentence]) -> Result<CorpusStats> {
    if sentences.is_empty() {
        return Err(Error::Data("corpus is empty".into()));
    }
    let mut surface = BTreeSet::new();
    let mut base = BTreeSet::new();
    let mut roles = BTreeMap::new();
    let mut classes = BTreeMap::new();
    let mut frames = BTreeMap::new();
    let mut hist = BTreeMap::new();
    let mut total_len = 0usize;
    let mut total_entropy = 0.0;
    for s in sentences {
        for t in &s.tokens {
            surface.insert(t.as_str());
            base.insert(base_form(t));
        }
        for r in &s.roles {
            *roles.entry(r.role).or_insert(0) += 1;
        }
        *classes.entry(s.metadata.complexity).or_insert(0) += 1;
        *frames.entry(s.metadata.frame.clone()).or_insert(0) += 1;
        *hist.entry(s.len()).or_insert(0) += 1;
        total_len += s.len();
        total_entropy += s.metadata.entropy;
    }
    let n = sentences.len() as f64;
    Ok(CorpusStats {
        num_sentences: sentences.len(),
        vocabulary_size: surface.len(),
        base_types: base.len(),
        mean_length: total_len as f64 / n,
        mean_entropy: total_entropy / n,
        role_frequencies: roles,
        complexity_counts: classes,
        frame_counts: frames,
        length_histogram: hist,
    })
}

/// Generation settings as read from a JSON config file. Every field is
/// optional; omitted fields take the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    #[serde(default = "VocabularySpec::appendix")]
    pub vocabulary: VocabularySpec,
    #[serde(default)]
    pub lexicon: LexiconParams,
    #[serde(default = "CorpusConfig::default_complexity")]
    pub complexity_distribution: BTreeMap<Complexity, f64>,
    #[serde(default = "CorpusConfig::default_frames")]
    pub semantic_frame_distribution: BTreeMap<String, f64>,
    #[serde(default)]
    pub num_sentences: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            vocabulary: VocabularySpec::appendix(),
            lexicon: LexiconParams::default(),
            complexity_distribution: Self::default_complexity(),
            semantic_frame_distribution: Self::default_frames(),
            num_sentences: None,
            seed: None,
        }
    }
}

impl CorpusConfig {
    fn default_complexity() -> BTreeMap<Complexity, f64> {
        [
            (Complexity::Simple, 0.55),
            (Complexity::Medium, 0.35),
            (Complexity::Complex, 0.10),
        ]
        .into()
    }

    fn default_frames() -> BTreeMap<String, f64> {
        [
            ("transitive_action", 0.1),
            ("transitive_with_location", 0.15),
            ("motion_with_source", 0.15),
            ("temporal_action", 0.15),
            ("instrumental_action", 0.15),
            ("multi_action", 0.15),
            ("temporal_complex", 0.15),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("corpus config: {e}")))
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        super::lexicon::build_lexicon(&self.vocabulary, &self.lexicon)
    }

    /// Generates `n` sentences (or the configured count), seeded by `seed`,
    /// then the configured seed, then the lexicon seed.
    pub fn generate(&self, n: Option<usize>, seed: Option<u64>) -> Result<Corpus> {
        let n = n
            .or(self.num_sentences)
            .ok_or_else(|| Error::Config("number of sentences not given".into()))?;
        let seed = seed.or(self.seed).unwrap_or(self.lexicon.random_seed);
        generate_corpus(
            n,
            &self.complexity_distribution,
            &self.semantic_frame_distribution,
            &self.lexicon()?,
            &super::frames::standard_frames(),
            seed,
        )
    }
}
