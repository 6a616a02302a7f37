//! JSONL corpus loading.
//!
//! Each line is a JSON object with string fields `id` and `text`; any other
//! fields are kept as string metadata. Documents are held in `id` order so the
//! row index of a document is stable across runs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate document id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document { doc_id: doc_id.into(), text: text.into(), meta: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Sorts by `doc_id`; rejects duplicate ids.
    pub fn new(mut docs: Vec<Document>) -> Result<Self, IngestError> {
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut index = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if index.insert(d.doc_id.clone(), i).is_some() {
                return Err(IngestError::DuplicateId { id: d.doc_id.clone(), line: 0 });
            }
        }
        Ok(Corpus { docs, index })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn index_of(&self, doc_id: &str) -> Option<usize> {
        self.index.get(doc_id).copied()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index_of(doc_id).map(|i| &self.docs[i])
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus, IngestError> {
    let mut docs = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| IngestError::Parse { line: line_no, message };
        let value: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(err("expected a JSON object".into()));
        };
        let doc_id = take_string(&mut obj, "id").map_err(err)?;
        let text = take_string(&mut obj, "text").map_err(err)?;
        if first_line.insert(doc_id.clone(), line_no).is_some() {
            return Err(IngestError::DuplicateId { id: doc_id, line: line_no });
        }
        let meta = obj
            .into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => (k, s),
                other => (k, other.to_string()),
            })
            .collect();
        docs.push(Document { doc_id, text, meta });
    }
    Corpus::new(docs)
}

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("field {key:?} must be a string")),
        None => Err(format!("missing field {key:?}")),
    }
}

/// Serializes in canonical order, one object per line.
pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in corpus.docs() {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(d.doc_id.clone()));
        obj.insert("text".into(), Value::String(d.text.clone()));
        for (k, v) in &d.meta {
            obj.insert(k.clone(), Value::String(v.clone()));
        }
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    out
}
