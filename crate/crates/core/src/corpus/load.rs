use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Jsonl,
    TextDir,
    Csv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "text-dir" | "text-directory" | "dir" => Ok(InputFormat::TextDir),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown input format `{other}` (expected jsonl, text-dir or csv)"
            ))),
        }
    }
}

impl std::fmt::Display for InputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputFormat::Jsonl => "jsonl",
            InputFormat::TextDir => "text-dir",
            InputFormat::Csv => "csv",
        })
    }
}

/// Loads raw documents. Tokens stay empty until the corpus is tokenized.
pub fn load_corpus(path: &Path, format: InputFormat) -> Result<Corpus> {
    match format {
        InputFormat::TextDir => read_text_dir(path),
        InputFormat::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_jsonl(BufReader::new(file))
        }
        InputFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_csv(file)
        }
    }
}

/// One JSON object per line. `text` is required; `id` defaults to the line
/// number; every other non-null field becomes metadata.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut docs = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let Value::Object(fields) = value else {
            return Err(Error::Malformed {
                line: lineno,
                message: "expected a JSON object".into(),
            });
        };
        let mut text = None;
        let mut id = None;
        let mut metadata = BTreeMap::new();
        for (key, value) in fields {
            match (key.as_str(), value) {
                ("text", Value::String(s)) => text = Some(s),
                ("text", _) => {
                    return Err(Error::Malformed {
                        line: lineno,
                        message: "`text` must be a string".into(),
                    })
                }
                ("id", Value::Null) => {}
                ("id", v) => id = Some(scalar_string(v)),
                (_, Value::Null) => {}
                (key, v) => {
                    metadata.insert(key.to_string(), scalar_string(v));
                }
            }
        }
        let text = text.ok_or_else(|| Error::Malformed {
            line: lineno,
            message: "missing `text`".into(),
        })?;
        docs.push(Document {
            id: id.unwrap_or_else(|| lineno.to_string()),
            metadata,
            text,
            tokens: Vec::new(),
            sentence_starts: Vec::new(),
        });
    }
    Corpus::new(docs)
}

fn scalar_string(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// CSV with a header row. `text` is mandatory, `id` optional (defaults to
/// the 1-based record number); remaining columns become metadata.
pub fn read_csv<R: Read>(reader: R) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let text_col = headers
        .iter()
        .position(|h| h == "text")
        .ok_or_else(|| Error::Malformed {
            line: 1,
            message: "header has no `text` column".into(),
        })?;
    let id_col = headers.iter().position(|h| h == "id");
    let mut docs = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(k + 2);
            Error::Malformed {
                line,
                message: e.to_string(),
            }
        })?;
        let mut metadata = BTreeMap::new();
        for (c, field) in record.iter().enumerate() {
            if c != text_col && Some(c) != id_col {
                metadata.insert(headers[c].to_string(), field.to_string());
            }
        }
        docs.push(Document {
            id: id_col
                .map(|c| record[c].to_string())
                .unwrap_or_else(|| (k + 1).to_string()),
            metadata,
            text: record[text_col].to_string(),
            tokens: Vec::new(),
            sentence_starts: Vec::new(),
        });
    }
    Corpus::new(docs)
}

/// Every `*.txt` file in `dir` (sorted by name) becomes one document whose id
/// is the file stem.
pub fn read_text_dir(dir: &Path) -> Result<Corpus> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.push(Document::new(stem, text).with_metadata("file", file));
    }
    Corpus::new(docs)
}

/// One stopword per line; blank lines ignored.
pub fn read_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect())
}
