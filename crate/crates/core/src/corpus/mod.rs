//! Documents, tokenization, lemma lookup and bigram co-occurrence counts.

mod bigrams;
mod load;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bigrams::{count_bigrams, BigramCounts};
pub use load::{load_corpus, read_csv, read_jsonl, read_text_dir, read_stopwords, InputFormat};
pub use tokenize::{LemmaTable, Tokenizer, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub metadata: BTreeMap<String, String>,
    pub text: String,
    pub tokens: Vec<String>,
    /// Token offsets where a new sentence begins. Empty unless a sentence
    /// splitter was configured, in which case it always starts with 0.
    #[serde(default)]
    pub sentence_starts: Vec<usize>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            metadata: BTreeMap::new(),
            text: text.into(),
            tokens: Vec::new(),
            sentence_starts: Vec::new(),
        }
    }

    /// Builds an already tokenized document; `text` is the tokens joined by spaces.
    pub fn from_tokens<S: AsRef<str>>(id: impl Into<String>, tokens: &[S]) -> Self {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        Document {
            id: id.into(),
            metadata: BTreeMap::new(),
            text: tokens.join(" "),
            tokens,
            sentence_starts: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Token runs inside which adjacency is meaningful (sentences, or the
    /// whole document when no splitter was used).
    pub fn segments(&self) -> impl Iterator<Item = &[String]> + '_ {
        let n = self.tokens.len();
        let starts: Vec<usize> = if self.sentence_starts.is_empty() {
            vec![0]
        } else {
            self.sentence_starts.clone()
        };
        (0..starts.len()).map(move |k| {
            let lo = starts[k].min(n);
            let hi = starts.get(k + 1).copied().unwrap_or(n).min(n);
            &self.tokens[lo..hi.max(lo)]
        })
    }

    pub fn apply_lemmas(&mut self, table: &LemmaTable) {
        for token in &mut self.tokens {
            if let Some(lemma) = table.get(token) {
                *token = lemma.to_string();
            }
        }
    }
}

/// Ordered document collection with its token vocabulary.
///
/// The vocabulary is recomputed whenever tokens change, so it always equals
/// the multiset union of the document tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: BTreeMap<String, u64>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for (k, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::EmptyId(k + 1));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        let mut corpus = Corpus {
            documents,
            vocabulary: BTreeMap::new(),
        };
        corpus.refresh_vocabulary();
        Ok(corpus)
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

    /// Word → total number of occurrences across all documents.
    pub fn vocabulary(&self) -> &BTreeMap<String, u64> {
        &self.vocabulary
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id == id)
    }

    pub fn tokenize(&mut self, tokenizer: &Tokenizer) {
        self.documents
            .par_iter_mut()
            .for_each(|doc| tokenizer.tokenize(doc));
        self.refresh_vocabulary();
    }

    pub fn apply_lemmas(&mut self, table: &LemmaTable) {
        if table.is_empty() {
            return;
        }
        self.documents
            .par_iter_mut()
            .for_each(|doc| doc.apply_lemmas(table));
        self.refresh_vocabulary();
    }

    /// All distinct metadata keys, sorted.
    pub fn metadata_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self
            .documents
            .iter()
            .flat_map(|d| d.metadata.keys().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        keys.sort();
        keys
    }

    fn refresh_vocabulary(&mut self) {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in &self.documents {
            for t in &doc.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        self.vocabulary = counts
            .into_iter()
            .map(|(w, c)| (w.to_string(), c))
            .collect();
    }
}
