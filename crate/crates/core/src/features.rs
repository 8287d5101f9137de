//! Document × feature count matrices: community features and unigram features.

use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::graph::CommunitySet;

/// Sparse non-negative integer matrix with labelled rows and columns.
/// Rows store `(column, count)` pairs sorted by column, zeros omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    doc_ids: Vec<String>,
    feature_labels: Vec<String>,
    rows: Vec<Vec<(usize, u64)>>,
}

impl CountMatrix {
    pub fn new(
        doc_ids: Vec<String>,
        feature_labels: Vec<String>,
        rows: Vec<Vec<(usize, u64)>>,
    ) -> Result<Self> {
        if rows.len() != doc_ids.len() {
            return Err(Error::Dimension(format!(
                "{} rows for {} document ids",
                rows.len(),
                doc_ids.len()
            )));
        }
        let nf = feature_labels.len();
        let rows = rows
            .into_iter()
            .map(|mut row| {
                row.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, u64)> = Vec::with_capacity(row.len());
                for (j, c) in row {
                    if j >= nf {
                        return Err(Error::Dimension(format!("column {j} outside {nf} features")));
                    }
                    if c == 0 {
                        continue;
                    }
                    match merged.last_mut() {
                        Some((k, acc)) if *k == j => *acc += c,
                        _ => merged.push((j, c)),
                    }
                }
                Ok(merged)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CountMatrix {
            doc_ids,
            feature_labels,
            rows,
        })
    }

    pub fn from_dense<S: Into<String>>(
        doc_ids: Vec<S>,
        feature_labels: Vec<S>,
        dense: &[Vec<u64>],
    ) -> Result<Self> {
        let feature_labels: Vec<String> = feature_labels.into_iter().map(Into::into).collect();
        if let Some(bad) = dense.iter().find(|r| r.len() != feature_labels.len()) {
            return Err(Error::Dimension(format!(
                "row of length {} for {} features",
                bad.len(),
                feature_labels.len()
            )));
        }
        let rows = dense
            .iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect())
            .collect();
        Self::new(doc_ids.into_iter().map(Into::into).collect(), feature_labels, rows)
    }

    /// Dense matrix with generated labels `d0..`, `f0..`.
    pub fn from_dense_unlabelled(dense: &[Vec<u64>]) -> Result<Self> {
        let n_features = dense.first().map_or(0, Vec::len);
        Self::from_dense(
            (0..dense.len()).map(|i| format!("d{i}")).collect(),
            (0..n_features).map(|j| format!("f{j}")).collect(),
            dense,
        )
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_labels.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn feature_labels(&self) -> &[String] {
        &self.feature_labels
    }

    pub fn row(&self, doc: usize) -> &[(usize, u64)] {
        &self.rows[doc]
    }

    pub fn get(&self, doc: usize, feature: usize) -> u64 {
        self.rows[doc]
            .binary_search_by_key(&feature, |&(j, _)| j)
            .map(|k| self.rows[doc][k].1)
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, c)| c).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.n_features()];
        for row in &self.rows {
            for &(j, c) in row {
                sums[j] += c;
            }
        }
        sums
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0; self.n_features()];
                for &(j, c) in row {
                    dense[j] = c;
                }
                dense
            })
            .collect()
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> CountMatrix {
        let mut new_index = vec![usize::MAX; self.n_features()];
        for (k, &j) in columns.iter().enumerate() {
            new_index[j] = k;
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut r: Vec<(usize, u64)> = row
                    .iter()
                    .filter(|&&(j, _)| new_index[j] != usize::MAX)
                    .map(|&(j, c)| (new_index[j], c))
                    .collect();
                r.sort_by_key(|&(j, _)| j);
                r
            })
            .collect();
        CountMatrix {
            doc_ids: self.doc_ids.clone(),
            feature_labels: columns.iter().map(|&j| self.feature_labels[j].clone()).collect(),
            rows,
        }
    }

    pub fn select_rows(&self, docs: &[usize]) -> CountMatrix {
        CountMatrix {
            doc_ids: docs.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            feature_labels: self.feature_labels.clone(),
            rows: docs.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Sparse triplets `doc_id,feature,count`, zeros omitted.
    pub fn write_triplets<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["doc_id", "feature", "count"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                wtr.write_record([
                    self.doc_ids[i].as_str(),
                    self.feature_labels[j].as_str(),
                    c.to_string().as_str(),
                ])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }

    /// Dense CSV: header `doc_id,<features...>`, one row per document.
    pub fn write_dense<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["doc_id".to_string()];
        header.extend(self.feature_labels.iter().cloned());
        wtr.write_record(&header)?;
        for (i, row) in self.to_dense().into_iter().enumerate() {
            let mut rec = vec![self.doc_ids[i].clone()];
            rec.extend(row.into_iter().map(|c| c.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimReport {
    pub dropped_docs: Vec<String>,
    pub dropped_features: Vec<String>,
}

impl TrimReport {
    pub fn is_empty(&self) -> bool {
        self.dropped_docs.is_empty() && self.dropped_features.is_empty()
    }
}

/// Removes all-zero rows and columns until none remain.
pub fn trim(matrix: &CountMatrix) -> Result<(CountMatrix, TrimReport)> {
    let mut current = matrix.clone();
    let mut report = TrimReport::default();
    loop {
        let keep_rows: Vec<usize> = (0..current.n_docs())
            .filter(|&i| !current.rows[i].is_empty())
            .collect();
        let col_sums = current.col_sums();
        let keep_cols: Vec<usize> = (0..current.n_features()).filter(|&j| col_sums[j] > 0).collect();
        if keep_rows.len() == current.n_docs() && keep_cols.len() == current.n_features() {
            break;
        }
        report.dropped_docs.extend(
            (0..current.n_docs())
                .filter(|i| !keep_rows.contains(i))
                .map(|i| current.doc_ids[i].clone()),
        );
        report.dropped_features.extend(
            (0..current.n_features())
                .filter(|&j| col_sums[j] == 0)
                .map(|j| current.feature_labels[j].clone()),
        );
        current = current.select_rows(&keep_rows).select_columns(&keep_cols);
    }
    if current.n_docs() == 0 || current.n_features() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok((current, report))
}

/// How a community's frequency in a document is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtmConvention {
    /// Occurrences of any member word.
    #[default]
    MemberCount,
    /// Adjacent token pairs whose two (distinct) words are both members.
    BigramMatch,
}

impl FromStr for DtmConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "member-count" => Ok(DtmConvention::MemberCount),
            "bigram-match" => Ok(DtmConvention::BigramMatch),
            other => Err(Error::Config(format!(
                "unknown dtm convention `{other}` (expected member-count or bigram-match)"
            ))),
        }
    }
}

impl std::fmt::Display for DtmConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DtmConvention::MemberCount => "member-count",
            DtmConvention::BigramMatch => "bigram-match",
        })
    }
}

/// `com_<id>:w1/w2/w3` with the three most frequent members.
fn community_labels(corpus: &Corpus, communities: &CommunitySet) -> Vec<String> {
    let vocab = corpus.vocabulary();
    communities
        .communities
        .iter()
        .map(|c| {
            let mut words: Vec<(&str, u64)> = c
                .words
                .iter()
                .map(|w| (w.as_str(), vocab.get(w).copied().unwrap_or(0)))
                .collect();
            words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let preview: Vec<&str> = words.iter().take(3).map(|&(w, _)| w).collect();
            format!("com_{}:{}", c.id, preview.join("/"))
        })
        .collect()
}

/// Community-feature matrix, trimmed. Tokens outside every community are
/// ignored; documents left without features are dropped and reported.
pub fn community_dtm(
    corpus: &Corpus,
    communities: &CommunitySet,
    convention: DtmConvention,
) -> Result<(CountMatrix, TrimReport)> {
    if communities.is_empty() {
        return Err(Error::NoCommunities);
    }
    let index = communities.word_index();
    let rows: Vec<Vec<(usize, u64)>> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut counts: HashMap<usize, u64> = HashMap::new();
            match convention {
                DtmConvention::MemberCount => {
                    for t in &doc.tokens {
                        if let Some(&k) = index.get(t.as_str()) {
                            *counts.entry(k).or_default() += 1;
                        }
                    }
                }
                DtmConvention::BigramMatch => {
                    for seg in doc.segments() {
                        for w in seg.windows(2) {
                            if w[0] == w[1] {
                                continue;
                            }
                            if let (Some(&a), Some(&b)) = (index.get(w[0].as_str()), index.get(w[1].as_str())) {
                                if a == b {
                                    *counts.entry(a).or_default() += 1;
                                }
                            }
                        }
                    }
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    let ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
    let matrix = CountMatrix::new(ids, community_labels(corpus, communities), rows)?;
    let (matrix, report) = trim(&matrix)?;
    if !report.dropped_docs.is_empty() {
        log::warn!(
            "{} document(s) have no community words and were dropped: {}",
            report.dropped_docs.len(),
            report.dropped_docs.join(", ")
        );
    }
    Ok((matrix, report))
}

/// Unigram matrix over words with corpus frequency ≥ `min_count`, features
/// in alphabetical order, trimmed.
pub fn unigram_dtm(corpus: &Corpus, min_count: u64) -> Result<(CountMatrix, TrimReport)> {
    let words: Vec<&str> = corpus
        .vocabulary()
        .iter()
        .filter(|&(_, &c)| c >= min_count.max(1))
        .map(|(w, _)| w.as_str())
        .collect();
    if words.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(j, &w)| (w, j)).collect();
    let rows: Vec<Vec<(usize, u64)>> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut counts: HashMap<usize, u64> = HashMap::new();
            for t in &doc.tokens {
                if let Some(&j) = index.get(t.as_str()) {
                    *counts.entry(j).or_default() += 1;
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    let ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
    let labels = words.iter().map(|w| w.to_string()).collect();
    trim(&CountMatrix::new(ids, labels, rows)?)
}
