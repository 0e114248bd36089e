use rand::Rng;
use serde::{Deserialize, Serialize};

use super::frames::{Complexity, Role, SemanticFrame};
use super::lexicon::{Lexicon, PosTag};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAt {
    pub position: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceMeta {
    pub complexity: Complexity,
    pub frame: String,
    pub length: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    pub pos_tags: Vec<PosTag>,
    /// Sorted by position, at most one entry per position.
    pub roles: Vec<RoleAt>,
    pub metadata: SentenceMeta,
}

impl AnnotatedSentence {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn role_at(&self, position: usize) -> Option<Role> {
        self.roles
            .binary_search_by_key(&position, |r| r.position)
            .ok()
            .map(|i| self.roles[i].role)
    }

    /// Structural checks shared by the generator and the loader.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.pos_tags.len() != self.tokens.len() {
            return Err(format!(
                "{} POS tags for {} tokens",
                self.pos_tags.len(),
                self.tokens.len()
            ));
        }
        if self.metadata.length != self.tokens.len() {
            return Err(format!(
                "metadata length {} but {} tokens",
                self.metadata.length,
                self.tokens.len()
            ));
        }
        for w in self.roles.windows(2) {
            if w[0].position >= w[1].position {
                return Err(format!("duplicate or unsorted role position {}", w[1].position));
            }
        }
        if let Some(r) = self.roles.iter().find(|r| r.position >= self.tokens.len()) {
            return Err(format!(
                "role {} at position {} out of range for length {}",
                r.role,
                r.position,
                self.tokens.len()
            ));
        }
        Ok(())
    }
}

/// Fills each slot of `frame` with a token from its category pool.
pub fn generate_sentence<R: Rng + ?Sized>(
    frame: &SemanticFrame,
    lexicon: &Lexicon,
    rng: &mut R,
) -> Result<AnnotatedSentence> {
    let mut tokens = Vec::with_capacity(frame.slots.len());
    let mut surprisal = 0.0;
    for slot in &frame.slots {
        let base = lexicon.sample_token(slot.category, rng)?;
        surprisal -= lexicon.probability(base).expect("sampled token is in lexicon").log2();
        let token = if frame.present_tense && slot.category.is_verb() {
            format!("{base}s")
        } else {
            base.to_string()
        };
        tokens.push(token);
    }
    let n = tokens.len();
    Ok(AnnotatedSentence {
        pos_tags: frame.slots.iter().map(|s| s.category.pos_tag()).collect(),
        roles: frame
            .slots
            .iter()
            .enumerate()
            .filter_map(|(position, s)| s.role.map(|role| RoleAt { position, role }))
            .collect(),
        metadata: SentenceMeta {
            complexity: frame.complexity,
            frame: frame.name.clone(),
            length: n,
            entropy: if n == 0 { 0.0 } else { surprisal / n as f64 },
        },
        tokens,
    })
}

/// Mean per-token surprisal in bits under the within-category Zipf weights.
pub fn sentence_entropy(sentence: &AnnotatedSentence, lexicon: &Lexicon) -> Result<f64> {
    if sentence.tokens.is_empty() {
        return Ok(0.0);
    }
    let total = sentence.tokens.iter().try_fold(0.0, |acc, t| {
        lexicon
            .probability(t)
            .map(|p| acc - p.log2())
            .ok_or_else(|| Error::Data(format!("token '{t}' is not in the lexicon")))
    })?;
    Ok(total / sentence.tokens.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusgen::frames::{standard_frames, Slot};
    use crate::corpusgen::lexicon::{build_lexicon, Category, LexiconParams, VocabularySpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lexicon_with_pools(size: usize) -> Lexicon {
        let spec = VocabularySpec::new(Category::ALL.map(|c| (c, size))).unwrap();
        build_lexicon(&spec, &LexiconParams { error_bias: 0.0, ..LexiconParams::default() }).unwrap()
    }

    #[test]
    fn transitive_action_layout() {
        let lex = lexicon_with_pools(20);
        let frame = &standard_frames()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_sentence(frame, &lex, &mut rng).unwrap();
        assert_eq!(s.len(), 5);
        use PosTag::*;
        assert_eq!(s.pos_tags, vec![NN, VB, NN, IN, NN]);
        let roles: Vec<_> = s.roles.iter().map(|r| (r.position, r.role)).collect();
        assert_eq!(roles, vec![(0, Role::Agent), (2, Role::Patient), (4, Role::Location)]);
        assert!(s.tokens[1].starts_with("transitive_verb") && s.tokens[1].ends_with('s'));
        assert_eq!(s.metadata.complexity, Complexity::Medium);
        s.validate().unwrap();
    }

    #[test]
    fn single_slot_frame_gives_single_token() {
        let lex = lexicon_with_pools(3);
        let frame = SemanticFrame::new(
            "solo",
            Complexity::Simple,
            vec![Slot::new("arg0", Category::Noun, Some(Role::Agent))],
        );
        let s = generate_sentence(&frame, &lex, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.roles.len(), 1);
    }

    #[test]
    fn single_token_pools_have_zero_entropy() {
        let lex = lexicon_with_pools(1);
        for frame in standard_frames() {
            let s = generate_sentence(&frame, &lex, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            assert_eq!(s.metadata.entropy, 0.0);
            assert_eq!(sentence_entropy(&s, &lex).unwrap(), 0.0);
        }
    }

    #[test]
    fn entropy_matches_hand_computed_surprisal() {
        let spec = VocabularySpec::new([
            (Category::Noun, 4),
            (Category::TransitiveVerb, 2),
            (Category::Preposition, 1),
            (Category::Location, 3),
        ])
        .unwrap();
        let lex = build_lexicon(&spec, &LexiconParams { zipfian_alpha: 1.0, ..Default::default() })
            .unwrap();
        let s = AnnotatedSentence {
            tokens: ["noun1", "transitive_verb2s", "noun4", "preposition1", "location2"]
                .map(String::from)
                .to_vec(),
            pos_tags: vec![PosTag::NN; 5],
            roles: vec![],
            metadata: SentenceMeta {
                complexity: Complexity::Medium,
                frame: "x".into(),
                length: 5,
                entropy: 0.0,
            },
        };
        let h4 = 1.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0;
        let h3 = 1.0 + 1.0 / 2.0 + 1.0 / 3.0;
        let p = [1.0 / h4, (1.0 / 2.0) / 1.5, (1.0 / 4.0) / h4, 1.0, (1.0 / 2.0) / h3];
        let expected = p.iter().map(|p: &f64| -p.log2()).sum::<f64>() / 5.0;
        assert!((sentence_entropy(&s, &lex).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn unknown_token_is_data_error() {
        let lex = lexicon_with_pools(2);
        let s = AnnotatedSentence {
            tokens: vec!["noun99".into()],
            pos_tags: vec![PosTag::NN],
            roles: vec![],
            metadata: SentenceMeta {
                complexity: Complexity::Simple,
                frame: "x".into(),
                length: 1,
                entropy: 0.0,
            },
        };
        assert!(matches!(sentence_entropy(&s, &lex), Err(Error::Data(_))));
    }
}
