use std::collections::HashMap;

use crate::corpusgen::AnnotatedSentence;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Word-level vocabulary. Ids 0..4 are the specials; corpus tokens follow in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
}

impl Tokenizer {
    pub fn build(sentences: &[AnnotatedSentence]) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Data("cannot build a tokenizer from an empty corpus".into()));
        }
        let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for t in sentences.iter().flat_map(|s| &s.tokens) {
            if !index.contains_key(t) {
                index.insert(t.clone(), vocab.len());
                vocab.push(t.clone());
            }
        }
        Ok(Tokenizer { vocab, index })
    }

    /// Rebuilds a tokenizer from a stored vocabulary list.
    pub fn from_vocab(vocab: Vec<String>) -> Result<Self> {
        if vocab.len() < SPECIALS.len() || vocab[..4].iter().zip(SPECIALS).any(|(a, b)| a != b) {
            return Err(Error::Data("vocabulary does not start with the special tokens".into()));
        }
        let index: HashMap<String, usize> =
            vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != vocab.len() {
            return Err(Error::Data("vocabulary contains duplicate tokens".into()));
        }
        Ok(Tokenizer { vocab, index })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.vocab.get(id).map_or(SPECIALS[UNK], String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusgen::sentence_from_json;

    fn sentence(text: &str) -> AnnotatedSentence {
        let n = text.split(' ').count();
        let rec = format!(
            r#"{{"sentence": "{text}", "semantic_roles": {{}}, "pos_tags": {:?},
                "metadata": {{"complexity": "simple", "frame": "x", "length": {n}, "entropy": 0.0}}}}"#,
            vec!["NN"; n]
        );
        sentence_from_json(&rec).unwrap()
    }

    #[test]
    fn vocab_is_specials_plus_distinct_tokens() {
        let s = [sentence("noun1 noun2 noun3"), sentence("noun3 noun4 noun5 noun6")];
        let tok = Tokenizer::build(&s).unwrap();
        assert_eq!(tok.len(), 10);
        assert_eq!(tok.id("noun1"), 4);
        assert_eq!(tok.id("noun6"), 9);
        assert_eq!(tok.id("noun77"), UNK);
    }

    #[test]
    fn round_trip_for_in_vocab_sentence() {
        let s = [sentence("noun1 transitive_verb3s noun2")];
        let tok = Tokenizer::build(&s).unwrap();
        assert_eq!(tok.decode(&tok.encode(&s[0].tokens)), s[0].tokens);
        let again = Tokenizer::from_vocab(tok.vocab().to_vec()).unwrap();
        assert_eq!(again, tok);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Tokenizer::build(&[]).is_err());
        assert!(Tokenizer::from_vocab(vec!["a".into()]).is_err());
    }
}
