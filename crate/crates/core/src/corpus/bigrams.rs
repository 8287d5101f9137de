use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::Corpus;
use crate::error::{Error, Result};

/// Unordered word-pair co-occurrence counts. Keys are stored with the
/// lexicographically smaller word first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BigramCounts {
    pairs: BTreeMap<(String, String), u64>,
    threshold: u64,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Counts adjacent token pairs inside each document (and sentence, when
/// sentence starts are recorded). Repeated tokens ("a a") are not counted.
pub fn count_bigrams(corpus: &Corpus) -> BigramCounts {
    let merged = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut local: HashMap<(&str, &str), u64> = HashMap::new();
            for seg in doc.segments() {
                for w in seg.windows(2) {
                    let (a, b) = (w[0].as_str(), w[1].as_str());
                    if a == b {
                        continue;
                    }
                    let k = if a < b { (a, b) } else { (b, a) };
                    *local.entry(k).or_default() += 1;
                }
            }
            local
        })
        .reduce(HashMap::new, |mut acc, other| {
            for (k, v) in other {
                *acc.entry(k).or_default() += v;
            }
            acc
        });
    BigramCounts {
        pairs: merged
            .into_iter()
            .map(|((a, b), c)| ((a.to_string(), b.to_string()), c))
            .collect(),
        threshold: 1,
    }
}

impl BigramCounts {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S, u64)>,
        S: AsRef<str>,
    {
        let mut out = BigramCounts {
            pairs: BTreeMap::new(),
            threshold: 1,
        };
        for (a, b, c) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b || c == 0 {
                continue;
            }
            *out.pairs.entry(key(a, b)).or_default() += c;
        }
        out
    }

    /// Minimum count every stored pair satisfies (1 before filtering).
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn get(&self, a: &str, b: &str) -> u64 {
        self.pairs.get(&key(a, b)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.pairs.values().sum()
    }

    pub fn max_count(&self) -> u64 {
        self.pairs.values().copied().max().unwrap_or(0)
    }

    /// Pairs in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.pairs
            .iter()
            .map(|((a, b), c)| (a.as_str(), b.as_str(), *c))
    }

    /// Keeps pairs with `count >= min_count`, or `count > min_count` when
    /// `strict_greater` is set.
    pub fn filter(&self, min_count: u64, strict_greater: bool) -> Result<BigramCounts> {
        if min_count == 0 {
            return Err(Error::Config("bigram threshold must be ≥ 1".into()));
        }
        let keep = |c: u64| {
            if strict_greater {
                c > min_count
            } else {
                c >= min_count
            }
        };
        Ok(BigramCounts {
            pairs: self
                .pairs
                .iter()
                .filter(|(_, c)| keep(**c))
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
            threshold: if strict_greater { min_count + 1 } else { min_count },
        })
    }
}
