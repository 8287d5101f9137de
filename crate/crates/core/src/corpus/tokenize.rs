use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Keep tokens made only of digits ("2022"). Off by default.
    pub keep_digits: bool,
    /// Removed after lowercasing; neighbors of a removed token become adjacent.
    pub stopwords: BTreeSet<String>,
    /// Regex on which the raw text is split into sentences. `None` means the
    /// whole document is one adjacency run.
    pub sentence_pattern: Option<String>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            keep_digits: false,
            stopwords: BTreeSet::new(),
            sentence_pattern: None,
        }
    }
}

/// Compiled form of a [`TokenizerConfig`].
#[derive(Debug, Clone)]
pub struct Tokenizer {
    config: TokenizerConfig,
    word: Regex,
    sentence: Option<Regex>,
}

impl Tokenizer {
    pub fn new(config: TokenizerConfig) -> Result<Self> {
        // Letters, marks and digits, allowing inner apostrophes ("don't").
        let word = Regex::new(r"[\p{L}\p{M}\p{N}]+(?:['’][\p{L}\p{M}\p{N}]+)*")
            .expect("static regex");
        let sentence = match &config.sentence_pattern {
            Some(p) => Some(
                Regex::new(p).map_err(|e| Error::Config(format!("sentence pattern: {e}")))?,
            ),
            None => None,
        };
        Ok(Tokenizer {
            config,
            word,
            sentence,
        })
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    /// Replaces `doc.tokens` with the tokens of `doc.text`; the text is kept.
    pub fn tokenize(&self, doc: &mut Document) {
        doc.tokens.clear();
        doc.sentence_starts.clear();
        match &self.sentence {
            None => {
                let tokens = self.words(&doc.text);
                doc.tokens = tokens;
            }
            Some(splitter) => {
                for piece in splitter.split(&doc.text) {
                    let words = self.words(piece);
                    if !words.is_empty() {
                        doc.sentence_starts.push(doc.tokens.len());
                        doc.tokens.extend(words);
                    }
                }
            }
        }
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut doc = Document::new("_", text);
        self.tokenize(&mut doc);
        doc.tokens
    }

    fn words(&self, text: &str) -> Vec<String> {
        self.word
            .find_iter(text)
            .filter_map(|m| {
                let raw = m.as_str();
                if !self.config.keep_digits && raw.chars().all(char::is_numeric) {
                    return None;
                }
                let token = if self.config.lowercase {
                    raw.to_lowercase()
                } else {
                    raw.to_string()
                };
                if self.config.stopwords.contains(&token) {
                    None
                } else {
                    Some(token)
                }
            })
            .collect()
    }
}

/// Surface form → lemma lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LemmaTable {
    map: HashMap<String, String>,
}

impl LemmaTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: impl Into<String>, lemma: impl Into<String>) {
        self.map.insert(surface.into(), lemma.into());
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.map.get(surface).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads `surface<TAB>lemma` lines. Blank lines are skipped.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = LemmaTable::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Malformed {
                line: k + 1,
                message: e.to_string(),
            })?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next()) {
                (Some(s), Some(l)) if !s.is_empty() && !l.is_empty() => table.insert(s, l),
                _ => {
                    return Err(Error::Malformed {
                        line: k + 1,
                        message: "expected `surface<TAB>lemma`".into(),
                    })
                }
            }
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(std::io::BufReader::new(file))
    }
}

impl<S: Into<String>, L: Into<String>> FromIterator<(S, L)> for LemmaTable {
    fn from_iter<I: IntoIterator<Item = (S, L)>>(iter: I) -> Self {
        let mut table = LemmaTable::new();
        for (s, l) in iter {
            table.insert(s, l);
        }
        table
    }
}
