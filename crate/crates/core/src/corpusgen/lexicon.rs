use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed set of lexical categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Noun,
    TransitiveVerb,
    IntransitiveVerb,
    CommunicationVerb,
    MotionVerb,
    ChangeVerb,
    Adjective,
    Adverb,
    Location,
    Temporal,
    Instrument,
    Preposition,
    Conjunction,
    Determiner,
}

impl Category {
    pub const ALL: [Category; 14] = [
        Category::Noun,
        Category::TransitiveVerb,
        Category::IntransitiveVerb,
        Category::CommunicationVerb,
        Category::MotionVerb,
        Category::ChangeVerb,
        Category::Adjective,
        Category::Adverb,
        Category::Location,
        Category::Temporal,
        Category::Instrument,
        Category::Preposition,
        Category::Conjunction,
        Category::Determiner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Noun => "noun",
            Category::TransitiveVerb => "transitive_verb",
            Category::IntransitiveVerb => "intransitive_verb",
            Category::CommunicationVerb => "communication_verb",
            Category::MotionVerb => "motion_verb",
            Category::ChangeVerb => "change_verb",
            Category::Adjective => "adjective",
            Category::Adverb => "adverb",
            Category::Location => "location",
            Category::Temporal => "temporal",
            Category::Instrument => "instrument",
            Category::Preposition => "preposition",
            Category::Conjunction => "conjunction",
            Category::Determiner => "determiner",
        }
    }

    pub fn is_verb(self) -> bool {
        matches!(
            self,
            Category::TransitiveVerb
                | Category::IntransitiveVerb
                | Category::CommunicationVerb
                | Category::MotionVerb
                | Category::ChangeVerb
        )
    }

    pub fn pos_tag(self) -> PosTag {
        match self {
            Category::Noun | Category::Location => PosTag::NN,
            Category::Preposition => PosTag::IN,
            Category::Adjective => PosTag::JJ,
            Category::Adverb => PosTag::RB,
            Category::Determiner => PosTag::DT,
            Category::Conjunction => PosTag::CC,
            Category::Temporal => PosTag::NNT,
            Category::Instrument => PosTag::NNI,
            _ => PosTag::VB,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown lexical category '{s}'")))
    }
}

/// Coarse part-of-speech tag derived from a lexical category.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PosTag {
    NN,
    VB,
    IN,
    JJ,
    RB,
    DT,
    CC,
    NNT,
    NNI,
}

impl PosTag {
    pub const ALL: [PosTag; 9] = [
        PosTag::NN,
        PosTag::VB,
        PosTag::IN,
        PosTag::JJ,
        PosTag::RB,
        PosTag::DT,
        PosTag::CC,
        PosTag::NNT,
        PosTag::NNI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::NN => "NN",
            PosTag::VB => "VB",
            PosTag::IN => "IN",
            PosTag::JJ => "JJ",
            PosTag::RB => "RB",
            PosTag::DT => "DT",
            PosTag::CC => "CC",
            PosTag::NNT => "NNT",
            PosTag::NNI => "NNI",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pool size per lexical category. Serialized as a plain name→count map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, usize>", into = "BTreeMap<String, usize>")]
pub struct VocabularySpec {
    sizes: BTreeMap<Category, usize>,
}

impl VocabularySpec {
    pub fn new(sizes: impl IntoIterator<Item = (Category, usize)>) -> Result<Self> {
        let sizes: BTreeMap<_, _> = sizes.into_iter().collect();
        if let Some((c, _)) = sizes.iter().find(|(_, &n)| n == 0) {
            return Err(Error::Config(format!("vocabulary size for '{c}' must be at least 1")));
        }
        if sizes.is_empty() {
            return Err(Error::Config("vocabulary specifies no categories".into()));
        }
        Ok(VocabularySpec { sizes })
    }

    /// Pool sizes used for the reference 25k-sentence corpus.
    pub fn appendix() -> Self {
        use Category::*;
        Self::new([
            (Noun, 300),
            (TransitiveVerb, 40),
            (IntransitiveVerb, 25),
            (CommunicationVerb, 20),
            (MotionVerb, 20),
            (ChangeVerb, 15),
            (Adjective, 40),
            (Adverb, 25),
            (Location, 150),
            (Temporal, 35),
            (Instrument, 25),
            (Preposition, 15),
            (Conjunction, 10),
            (Determiner, 8),
        ])
        .expect("static vocabulary is valid")
    }

    pub fn sizes(&self) -> &BTreeMap<Category, usize> {
        &self.sizes
    }

    pub fn total(&self) -> usize {
        self.sizes.values().sum()
    }
}

impl TryFrom<BTreeMap<String, usize>> for VocabularySpec {
    type Error = Error;

    fn try_from(raw: BTreeMap<String, usize>) -> Result<Self> {
        let parsed = raw
            .into_iter()
            .map(|(k, v)| Ok((k.parse::<Category>()?, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }
}

impl From<VocabularySpec> for BTreeMap<String, usize> {
    fn from(spec: VocabularySpec) -> Self {
        spec.sizes.into_iter().map(|(k, v)| (k.name().to_string(), v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconParams {
    pub num_clusters: usize,
    pub zipfian_alpha: f64,
    pub error_bias: f64,
    pub random_seed: u64,
}

impl Default for LexiconParams {
    fn default() -> Self {
        LexiconParams {
            num_clusters: 5,
            zipfian_alpha: 1.05,
            error_bias: 0.00001,
            random_seed: 42,
        }
    }
}

impl LexiconParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::Config("num_clusters must be positive".into()));
        }
        if !(self.zipfian_alpha > 0.0 && self.zipfian_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "zipfian_alpha must be positive, got {}",
                self.zipfian_alpha
            )));
        }
        if !(0.0..1.0).contains(&self.error_bias) {
            return Err(Error::Config(format!(
                "error_bias must lie in [0, 1), got {}",
                self.error_bias
            )));
        }
        Ok(())
    }
}

/// Ranked tokens of one category with normalised Zipf weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    tokens: Vec<String>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    clusters: Vec<usize>,
}

impl Pool {
    fn new(category: Category, size: usize, alpha: f64, num_clusters: usize) -> Self {
        let raw: Vec<f64> = (1..=size).map(|r| (r as f64).powf(-alpha)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let cdf = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Pool {
            tokens: (1..=size).map(|r| format!("{}{r}", category.name())).collect(),
            weights,
            cdf,
            clusters: (0..size).map(|i| i % num_clusters).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn clusters(&self) -> &[usize] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R, error_bias: f64) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.len() - 1);
        if error_bias > 0.0 && rng.random::<f64>() < error_bias {
            return rng.random_range(0..self.len());
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pools: BTreeMap<Category, Pool>,
    index: HashMap<String, (Category, usize)>,
    params: LexiconParams,
}

/// Builds ranked Zipf pools for every category in `spec`.
pub fn build_lexicon(spec: &VocabularySpec, params: &LexiconParams) -> Result<Lexicon> {
    params.validate()?;
    let pools: BTreeMap<_, _> = spec
        .sizes()
        .iter()
        .map(|(&c, &n)| (c, Pool::new(c, n, params.zipfian_alpha, params.num_clusters)))
        .collect();
    let index = pools
        .iter()
        .flat_map(|(&c, p)| p.tokens.iter().enumerate().map(move |(i, t)| (t.clone(), (c, i))))
        .collect();
    Ok(Lexicon {
        pools,
        index,
        params: params.clone(),
    })
}

impl Lexicon {
    pub fn params(&self) -> &LexiconParams {
        &self.params
    }

    pub fn spec(&self) -> VocabularySpec {
        VocabularySpec {
            sizes: self.pools.iter().map(|(&c, p)| (c, p.len())).collect(),
        }
    }

    pub fn pool(&self, category: Category) -> Result<&Pool> {
        self.pools
            .get(&category)
            .ok_or_else(|| Error::Config(format!("lexicon has no '{category}' pool")))
    }

    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        self.pools.keys().copied()
    }

    pub fn num_tokens(&self) -> usize {
        self.pools.values().map(Pool::len).sum()
    }

    pub fn max_pool_size(&self) -> usize {
        self.pools.values().map(Pool::len).max().unwrap_or(0)
    }

    /// Draws one base token. With probability `error_bias` the Zipf draw is
    /// replaced by a uniform draw from the same pool.
    pub fn sample_token<R: Rng + ?Sized>(&self, category: Category, rng: &mut R) -> Result<&str> {
        let pool = self.pool(category)?;
        Ok(&pool.tokens[pool.sample_index(rng, self.params.error_bias)])
    }

    /// Resolves a surface token (with or without the verb suffix) to its
    /// category and rank index.
    pub fn lookup(&self, token: &str) -> Option<(Category, usize)> {
        self.index.get(token).copied().or_else(|| {
            let base = token.strip_suffix('s')?;
            self.index.get(base).copied().filter(|(c, _)| c.is_verb())
        })
    }

    /// Normalised within-category weight of a surface token.
    pub fn probability(&self, token: &str) -> Option<f64> {
        let (c, i) = self.lookup(token)?;
        Some(self.pools[&c].weights[i])
    }

    pub fn cluster(&self, token: &str) -> Option<usize> {
        let (c, i) = self.lookup(token)?;
        Some(self.pools[&c].clusters[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64) -> LexiconParams {
        LexiconParams {
            zipfian_alpha: alpha,
            error_bias: 0.0,
            ..LexiconParams::default()
        }
    }

    #[test]
    fn appendix_vocabulary_sums_pool_sizes() {
        let lex = build_lexicon(&VocabularySpec::appendix(), &LexiconParams::default()).unwrap();
        assert_eq!(lex.num_tokens(), 728);
        assert_eq!(VocabularySpec::appendix().total(), 728);
    }

    #[test]
    fn single_token_pool_has_unit_weight() {
        let spec = VocabularySpec::new([(Category::Noun, 1)]).unwrap();
        let lex = build_lexicon(&spec, &params(2.0)).unwrap();
        let pool = lex.pool(Category::Noun).unwrap();
        assert_eq!(pool.tokens(), &["noun1".to_string()]);
        assert_eq!(pool.weights(), &[1.0]);
    }

    #[test]
    fn harmonic_weights_for_four_nouns() {
        let spec = VocabularySpec::new([(Category::Noun, 4)]).unwrap();
        let lex = build_lexicon(&spec, &params(1.0)).unwrap();
        let h = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
        let expected = [1.0 / h, 0.5 / h, 1.0 / 3.0 / h, 0.25 / h];
        for (w, e) in lex.pool(Category::Noun).unwrap().weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((expected[0] - 0.48).abs() < 1e-12);
    }

    #[test]
    fn unknown_category_is_config_error() {
        let raw: BTreeMap<String, usize> = [("gerund".to_string(), 3)].into();
        let err = VocabularySpec::try_from(raw).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn missing_pool_is_config_error() {
        let spec = VocabularySpec::new([(Category::Noun, 3)]).unwrap();
        let lex = build_lexicon(&spec, &params(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            lex.sample_token(Category::Adverb, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn clusters_are_round_robin() {
        let spec = VocabularySpec::new([(Category::Noun, 7)]).unwrap();
        let lex = build_lexicon(&spec, &LexiconParams { num_clusters: 3, ..params(1.0) }).unwrap();
        assert_eq!(lex.pool(Category::Noun).unwrap().clusters(), &[0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn verb_suffix_resolves_to_base() {
        let lex = build_lexicon(&VocabularySpec::appendix(), &params(1.05)).unwrap();
        assert_eq!(lex.lookup("transitive_verb8s"), Some((Category::TransitiveVerb, 7)));
        assert_eq!(lex.lookup("noun139"), Some((Category::Noun, 138)));
        assert_eq!(lex.lookup("noun139s"), None);
    }

    #[test]
    fn seeded_draws_repeat() {
        let lex = build_lexicon(&VocabularySpec::appendix(), &params(1.05)).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| lex.sample_token(Category::Noun, &mut rng).unwrap().to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(params(0.0).validate().is_err());
        assert!(LexiconParams { error_bias: 1.0, ..params(1.0) }.validate().is_err());
        assert!(LexiconParams { num_clusters: 0, ..params(1.0) }.validate().is_err());
    }
}
