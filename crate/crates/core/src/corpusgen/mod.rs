//! Synthetic corpora built from semantic frames.
//!
//! A [`Lexicon`] holds one Zipf-weighted pool of placeholder tokens per
//! lexical category (`noun1`, `noun2`, ...). A [`SemanticFrame`] is an ordered
//! list of slots, each naming a category and optionally a semantic role.
//! Sentences are produced by filling every slot of a sampled frame and carry
//! POS tags, positioned roles, and complexity/entropy metadata.

mod corpus;
mod frames;
mod io;
mod lexicon;
mod sentence;

pub use corpus::{
    corpus_stats, generate_corpus, implied_frame_probabilities, sentence_rng, Corpus,
    CorpusConfig, CorpusStats, Distributions, GenerationMeta, GENERATOR_VERSION, SCHEMA_VERSION,
};
pub use frames::{standard_frames, Complexity, Role, SemanticFrame, Slot};
pub use io::{corpus_from_json, corpus_to_json, load_corpus, save_corpus, sentence_from_json};
pub use lexicon::{build_lexicon, Category, Lexicon, LexiconParams, Pool, PosTag, VocabularySpec};
pub use sentence::{generate_sentence, sentence_entropy, AnnotatedSentence, RoleAt, SentenceMeta};
