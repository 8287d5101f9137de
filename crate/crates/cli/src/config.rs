//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use communityfish::corpus::InputFormat;
use communityfish::pipeline::PipelineConfig;
use communityfish::scaler::UncertaintyMethod;
use communityfish::{Error, Result};
use serde::Serialize;

/// `(key, default, description)` for every run-config key.
pub const RUN_KEYS: &[(&str, &str, &str)] = &[
    ("input", "(none)", "corpus path: a .jsonl or .csv file, or a directory of .txt files"),
    ("format", "from extension", "jsonl, csv or text-dir"),
    ("stopwords", "(none)", "file with one stopword per line"),
    ("lemmas", "(none)", "tab-separated surface<TAB>lemma table"),
    ("lowercase", "true", "lowercase tokens before everything else"),
    ("keep_digits", "false", "keep all-digit tokens"),
    ("sentence_pattern", "(none)", "regex splitting text into sentences; bigrams never cross a split"),
    ("min_bigram_count", "30", "bigram threshold π"),
    ("strict_greater", "false", "keep bigrams with count > π instead of ≥ π"),
    ("clustering", "louvain", "louvain or leiden"),
    ("min_community_size", "2", "smaller communities are dropped"),
    ("dtm_convention", "member-count", "member-count or bigram-match"),
    ("unigram_min_count", "1", "minimum corpus frequency of unigram features"),
    ("tol", "1e-8", "relative log-likelihood change that ends the fit"),
    ("max_iter", "500", "maximum alternation rounds"),
    ("anchor_low", "first document", "document placed at the low end of the scale"),
    ("anchor_high", "last document", "document placed at the high end of the scale"),
    ("linear_predictor_clamp", "30", "bound on |α + ψ + θβ| inside exponentials"),
    ("se", "bootstrap", "bootstrap, analytic or none"),
    ("bootstrap", "200", "bootstrap replicates B"),
    ("seed", "0", "seed for clustering and bootstrap"),
    ("out", "out", "output directory"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub lowercase: bool,
    pub keep_digits: bool,
    pub sentence_pattern: Option<String>,
    pub pipeline: PipelineConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            format: None,
            stopwords: None,
            lemmas: None,
            lowercase: true,
            keep_digits: false,
            sentence_pattern: None,
            pipeline: PipelineConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{value}` for `{key}` (expected true or false)"))),
    }
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

pub fn parse_uncertainty(value: &str) -> Result<Option<UncertaintyMethod>> {
    match value {
        "bootstrap" => Ok(Some(UncertaintyMethod::Bootstrap)),
        "analytic" => Ok(Some(UncertaintyMethod::Analytic)),
        "none" => Ok(None),
        other => Err(Error::Config(format!(
            "invalid value `{other}` for `se` (expected bootstrap, analytic or none)"
        ))),
    }
}

/// Relative paths in a config file are resolved against its directory.
fn resolve(base: Option<&Path>, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let fit = &mut self.pipeline.fit;
        match key {
            "input" => self.input = Some(resolve(base, value)),
            "format" => self.format = Some(parse(key, value)?),
            "stopwords" => self.stopwords = optional(value).map(|v| resolve(base, &v)),
            "lemmas" => self.lemmas = optional(value).map(|v| resolve(base, &v)),
            "lowercase" => self.lowercase = parse_bool(key, value)?,
            "keep_digits" => self.keep_digits = parse_bool(key, value)?,
            "sentence_pattern" => self.sentence_pattern = optional(value),
            "min_bigram_count" => self.pipeline.min_bigram_count = parse(key, value)?,
            "strict_greater" => self.pipeline.strict_greater = parse_bool(key, value)?,
            "clustering" => self.pipeline.clustering = value.parse()?,
            "min_community_size" => self.pipeline.min_community_size = parse(key, value)?,
            "dtm_convention" => self.pipeline.dtm_convention = value.parse()?,
            "unigram_min_count" => self.pipeline.unigram_min_count = parse(key, value)?,
            "tol" => fit.tol = parse(key, value)?,
            "max_iter" => fit.max_iter = parse(key, value)?,
            "anchor_low" => fit.anchor_low = optional(value),
            "anchor_high" => fit.anchor_high = optional(value),
            "linear_predictor_clamp" => fit.linear_predictor_clamp = parse(key, value)?,
            "se" => self.pipeline.uncertainty = parse_uncertainty(value)?,
            "bootstrap" => self.pipeline.bootstrap_replicates = parse(key, value)?,
            "seed" => self.pipeline.seed = parse(key, value)?,
            "out" => self.out = resolve(base, value),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        for (key, value) in read_pairs(path)? {
            self.set(&key, &value, base)?;
        }
        Ok(())
    }

    pub fn input_format(&self) -> Result<InputFormat> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        let input = self.input()?;
        if input.is_dir() {
            return Ok(InputFormat::TextDir);
        }
        match input.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(InputFormat::Jsonl),
            Some("csv") => Ok(InputFormat::Csv),
            _ => Err(Error::Config(format!(
                "cannot infer the format of `{}`; set `format`",
                input.display()
            ))),
        }
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("no input corpus (set `input` in the config file or pass --input)".into()))
    }
}

/// Reads `key = value` lines; `#` starts a comment. A key may appear once.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text)
}

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
            line: k + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_string();
        if !seen.insert(key.clone()) {
            return Err(Error::Malformed {
                line: k + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a `key=value` command-line override.
pub fn split_override(raw: &str) -> Result<(String, String)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))
}

/// Settings of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSpec {
    /// `matrix` draws count matrices from the scaling model; `corpus` plants
    /// two word communities and compares the two pipelines.
    pub kind: SimulationKind,
    pub docs: usize,
    pub features: usize,
    pub row_total: u64,
    pub beta_sd: f64,
    pub psi_sd: f64,
    pub words_per_community: usize,
    pub replications: usize,
    /// Bootstrap replicates per replication; 0 skips intervals.
    pub bootstrap: usize,
    pub min_bigram_count: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationKind {
    Matrix,
    Corpus,
}

pub const SIM_KEYS: &[(&str, &str, &str)] = &[
    ("kind", "matrix", "matrix or corpus"),
    ("docs", "25", "documents per replication"),
    ("features", "40", "features per matrix (kind = matrix)"),
    ("row_total", "500", "expected tokens per document (kind = matrix)"),
    ("beta_sd", "0.5", "sd of the planted β (kind = matrix)"),
    ("psi_sd", "1.0", "sd of the planted ψ (kind = matrix)"),
    ("words_per_community", "8", "planted community size (kind = corpus)"),
    ("min_bigram_count", "30", "bigram threshold π (kind = corpus)"),
    ("replications", "20", "independent replications"),
    ("bootstrap", "0", "bootstrap replicates per replication (0 = none)"),
    ("seed", "0", "base seed; replication r uses seed + r"),
];

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            kind: SimulationKind::Matrix,
            docs: 25,
            features: 40,
            row_total: 500,
            beta_sd: 0.5,
            psi_sd: 1.0,
            words_per_community: 8,
            replications: 20,
            bootstrap: 0,
            min_bigram_count: 30,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => {
                self.kind = match value {
                    "matrix" => SimulationKind::Matrix,
                    "corpus" => SimulationKind::Corpus,
                    other => return Err(Error::Config(format!("invalid value `{other}` for `kind`"))),
                }
            }
            "docs" => self.docs = parse(key, value)?,
            "features" => self.features = parse(key, value)?,
            "row_total" => self.row_total = parse(key, value)?,
            "beta_sd" => self.beta_sd = parse(key, value)?,
            "psi_sd" => self.psi_sd = parse(key, value)?,
            "words_per_community" => self.words_per_community = parse(key, value)?,
            "replications" => self.replications = parse(key, value)?,
            "bootstrap" => self.bootstrap = parse(key, value)?,
            "min_bigram_count" => self.min_bigram_count = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown simulation key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (key, value) in read_pairs(path)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }
}
