use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::corpus::{corpus_stats, Corpus, CorpusStats, GenerationMeta, SCHEMA_VERSION};
use super::frames::Role;
use super::lexicon::PosTag;
use super::sentence::{AnnotatedSentence, RoleAt, SentenceMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RoleEntry {
    role: Role,
    position: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRecord {
    sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    pos_tags: Vec<PosTag>,
    /// Token-keyed view; when a token repeats, the first occurrence is kept.
    semantic_roles: IndexMap<String, RoleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roles_by_position: Option<Vec<RoleAt>>,
    metadata: SentenceMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    metadata: GenerationMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    statistics: Option<CorpusStats>,
    sentences: Vec<SentenceRecord>,
}

impl From<&AnnotatedSentence> for SentenceRecord {
    fn from(s: &AnnotatedSentence) -> Self {
        let mut semantic_roles = IndexMap::new();
        for r in &s.roles {
            semantic_roles
                .entry(s.tokens[r.position].clone())
                .or_insert(RoleEntry {
                    role: r.role,
                    position: r.position,
                });
        }
        SentenceRecord {
            sentence: s.text(),
            tokens: Some(s.tokens.clone()),
            pos_tags: s.pos_tags.clone(),
            semantic_roles,
            roles_by_position: Some(s.roles.clone()),
            metadata: s.metadata.clone(),
        }
    }
}

impl TryFrom<SentenceRecord> for AnnotatedSentence {
    type Error = String;

    fn try_from(rec: SentenceRecord) -> std::result::Result<Self, String> {
        let split: Vec<String> = rec.sentence.split_whitespace().map(String::from).collect();
        let tokens = match rec.tokens {
            Some(t) if t != split => return Err("tokens disagree with sentence text".into()),
            Some(t) => t,
            None => split,
        };
        let mut roles = match rec.roles_by_position {
            Some(r) => r,
            None => rec
                .semantic_roles
                .values()
                .map(|e| RoleAt {
                    position: e.position,
                    role: e.role,
                })
                .collect(),
        };
        roles.sort_by_key(|r| r.position);
        for (token, e) in &rec.semantic_roles {
            if tokens.get(e.position) != Some(token) {
                return Err(format!(
                    "semantic_roles entry '{token}' points at position {} which holds {:?}",
                    e.position,
                    tokens.get(e.position)
                ));
            }
            if !roles.iter().any(|r| r.position == e.position && r.role == e.role) {
                return Err(format!(
                    "semantic_roles entry '{token}' is missing from roles_by_position"
                ));
            }
        }
        let s = AnnotatedSentence {
            tokens,
            pos_tags: rec.pos_tags,
            roles,
            metadata: rec.metadata,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Parses one sentence record in the corpus JSON shape. `tokens` and
/// `roles_by_position` may be absent, in which case they are derived from the
/// sentence text and the token-keyed role map.
pub fn sentence_from_json(text: &str) -> Result<AnnotatedSentence> {
    let rec: SentenceRecord = serde_json::from_str(text)
        .map_err(|e| Error::Data(format!("malformed sentence record: {e}")))?;
    AnnotatedSentence::try_from(rec).map_err(Error::Data)
}

pub fn corpus_to_json(corpus: &Corpus, indent: bool) -> Result<String> {
    let file = CorpusFile {
        metadata: corpus.metadata.clone(),
        statistics: Some(corpus.statistics.clone()),
        sentences: corpus.sentences.iter().map(SentenceRecord::from).collect(),
    };
    let mut out = if indent {
        serde_json::to_string_pretty(&file)
    } else {
        serde_json::to_string(&file)
    }
    .map_err(|e| Error::Data(format!("cannot serialize corpus: {e}")))?;
    out.push('\n');
    Ok(out)
}

pub fn corpus_from_json(text: &str) -> Result<Corpus> {
    let file: CorpusFile =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed corpus JSON: {e}")))?;
    if file.metadata.schema_version != SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "corpus schema version {} is not supported (expected {SCHEMA_VERSION})",
            file.metadata.schema_version
        )));
    }
    let sentences = file
        .sentences
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            AnnotatedSentence::try_from(rec).map_err(|m| Error::Data(format!("sentence {i}: {m}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let statistics = corpus_stats(&sentences)?;
    if let Some(stored) = file.statistics {
        if stored != statistics {
            return Err(Error::Data(
                "stored statistics do not match the sentences".into(),
            ));
        }
    }
    Ok(Corpus {
        metadata: file.metadata,
        statistics,
        sentences,
    })
}

pub fn save_corpus(corpus: &Corpus, path: &Path, indent: bool) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, corpus_to_json(corpus, indent)?).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    corpus_from_json(&text).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}
