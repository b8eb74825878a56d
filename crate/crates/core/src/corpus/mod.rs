//! Documents, token budgeting and seeded sampling.

mod ingest;
mod sample;

pub use ingest::{ingest_dir, ingest_table, load_corpus, EmptyTextPolicy, IngestOptions, UnreadablePolicy};
pub use sample::{allocate_largest_remainder, sample_split, SampleStrategy, Split};

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::digest::{hash_fields, sha256_hex};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate document id `{id}` ({first} and {second})")]
    DuplicateId {
        id: String,
        first: String,
        second: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("empty text for document `{id}` at {location}")]
    EmptyText { id: String, location: String },
    #[error("malformed table {path}: {message}")]
    Table { path: PathBuf, message: String },
    #[error("not enough documents: requested {requested}, corpus has {available}")]
    InsufficientDocuments { requested: usize, available: usize },
    #[error("stratification key `{key}` missing on document `{doc}`")]
    UnknownStratum { key: String, doc: String },
    #[error("strata too small for their allocation: {0}")]
    StrataTooSmall(String),
}

/// Estimated model tokens: one token per 0.75 words, rounded up.
///
/// Words are maximal runs of non-whitespace characters.
pub fn estimate_tokens(text: &str) -> u64 {
    let words = text.split_whitespace().count() as u64;
    // ceil(words / 0.75) == ceil(4 * words / 3)
    (4 * words).div_ceil(3)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// File path or `file:line` of the originating row.
    pub source: String,
    pub token_estimate: u64,
    /// Covariates, e.g. for stratified sampling.
    pub metadata: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Document {
            id: id.into(),
            token_estimate: estimate_tokens(&text),
            text,
            source: String::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }
}

/// An ordered, id-unique set of documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    manifest_digest: String,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                let first = documents.iter().find(|x| x.id == d.id).unwrap();
                return Err(CorpusError::DuplicateId {
                    id: d.id.clone(),
                    first: first.source.clone(),
                    second: d.source.clone(),
                });
            }
        }
        let manifest_digest = manifest_digest(&documents);
        Ok(Corpus {
            documents,
            manifest_digest,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Digest over the ordered `(id, content hash)` pairs.
    pub fn manifest_digest(&self) -> &str {
        &self.manifest_digest
    }

    /// Documents whose ids are in `keep`, in corpus order.
    pub fn subset(&self, keep: &HashSet<String>) -> Corpus {
        let docs = self
            .documents
            .iter()
            .filter(|d| keep.contains(&d.id))
            .cloned()
            .collect();
        Corpus::new(docs).expect("subset of a valid corpus is valid")
    }

    /// JSON manifest describing the corpus (no document text).
    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            digest: self.manifest_digest.clone(),
            documents: self
                .documents
                .iter()
                .map(|d| ManifestEntry {
                    id: d.id.clone(),
                    source: d.source.clone(),
                    sha256: d.content_hash(),
                    token_estimate: d.token_estimate,
                })
                .collect(),
        }
    }
}

fn manifest_digest(docs: &[Document]) -> String {
    let mut fields = Vec::with_capacity(docs.len() * 2);
    for d in docs {
        fields.push(d.id.clone());
        fields.push(d.content_hash());
    }
    hash_fields(fields)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub digest: String,
    pub documents: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: String,
    pub sha256: String,
    pub token_estimate: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn token_ratio() {
        assert_eq!(estimate_tokens("hello world again"), 4);
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("  \n\t "), 0);
        assert_eq!(estimate_tokens(&"w ".repeat(750)), 1000);
        assert_eq!(estimate_tokens("one"), 2);
    }

    #[test]
    fn digest_tracks_content() {
        let a = Corpus::new(vec![Document::new("a", "x"), Document::new("b", "y")]).unwrap();
        let b = Corpus::new(vec![Document::new("a", "x"), Document::new("b", "y")]).unwrap();
        let c = Corpus::new(vec![Document::new("a", "x"), Document::new("b", "z")]).unwrap();
        assert_eq!(a.manifest_digest(), b.manifest_digest());
        assert_ne!(a.manifest_digest(), c.manifest_digest());
        assert!(Corpus::new(vec![Document::new("a", "x"), Document::new("a", "y")]).is_err());
    }

    proptest! {
        #[test]
        fn tokens_subadditive_under_concatenation(a in "[a-z \n]{0,60}", b in "[a-z \n]{0,60}") {
            let joined = format!("{a} {b}");
            prop_assert!(estimate_tokens(&joined) <= estimate_tokens(&a) + estimate_tokens(&b) + 1);
        }
    }
}
