//! Self-labeling: score every mention by how well its concept fits the rest
//! of its document, then threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::ConceptId;
use crate::matrix::{cosine_similarity, document_context_vector, ConceptVector, DocConceptMatrix, MatrixError};
use crate::ner::Mention;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum SelfLabelError {
    #[error("no embedding for concept {0}")]
    MissingEmbedding(ConceptId),
    #[error("mention references document {0:?} outside the matrix")]
    UnknownDocument(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("threshold sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Per-concept embeddings, all the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    vectors: BTreeMap<ConceptId, ConceptVector<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(
        entries: impl IntoIterator<Item = (ConceptId, ConceptVector<T>)>,
    ) -> Result<Self, SelfLabelError> {
        let vectors: BTreeMap<_, _> = entries.into_iter().collect();
        let dim = vectors.values().next().map_or(0, ConceptVector::dim);
        if let Some(bad) = vectors.values().find(|v| v.dim() != dim) {
            return Err(SelfLabelError::Dimension { expected: dim, got: bad.dim() });
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Pairs `vectors` with the matrix's concept order.
    pub fn from_columns(x: &DocConceptMatrix, vectors: Vec<ConceptVector<T>>) -> Result<Self, SelfLabelError> {
        if vectors.len() != x.m_concepts() {
            return Err(SelfLabelError::Dimension { expected: x.m_concepts(), got: vectors.len() });
        }
        Self::new(x.concept_ids().iter().cloned().zip(vectors))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &ConceptId) -> Option<&ConceptVector<T>> {
        self.vectors.get(id)
    }

    /// Multiplies every vector by `by`.
    pub fn scaled(&self, by: T) -> Self {
        EmbeddingTable {
            dim: self.dim,
            vectors: self.vectors.iter().map(|(k, v)| (k.clone(), v.scaled(by))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMention {
    #[serde(flatten)]
    pub mention: Mention,
    pub score: f64,
}

/// Cosine between a mention's concept embedding and the count-weighted sum
/// of the other concepts in its document.
///
/// Filtered mentions are scored too. A filtered mention whose concept never
/// occurs unfiltered has no co-occurrence row and scores 0.
pub fn score_mentions<T: Scalar>(
    mentions: &[Mention],
    x: &DocConceptMatrix,
    embeddings: &EmbeddingTable<T>,
) -> Result<Vec<ScoredMention>, SelfLabelError> {
    let columns: Vec<ConceptVector<T>> = x
        .concept_ids()
        .iter()
        .map(|id| embeddings.get(id).cloned().ok_or_else(|| SelfLabelError::MissingEmbedding(id.clone())))
        .collect::<Result<_, _>>()?;
    mentions.iter().map(|m| score_one(m, x, embeddings, &columns)).collect()
}

fn score_one<T: Scalar>(
    m: &Mention,
    x: &DocConceptMatrix,
    embeddings: &EmbeddingTable<T>,
    columns: &[ConceptVector<T>],
) -> Result<ScoredMention, SelfLabelError> {
    let doc = x.doc_index(&m.doc_id).ok_or_else(|| SelfLabelError::UnknownDocument(m.doc_id.clone()))?;
    let own = match embeddings.get(&m.concept_id) {
        Some(e) => e,
        None if m.filtered => {
            return Ok(ScoredMention { mention: m.clone(), score: 0.0 });
        }
        None => return Err(SelfLabelError::MissingEmbedding(m.concept_id.clone())),
    };
    let exclude = x.concept_index(&m.concept_id);
    let context = document_context_vector(x, columns, doc, exclude)?;
    let score = if context.dim() == 0 { T::zero() } else { cosine_similarity(own, &context)? };
    Ok(ScoredMention { mention: m.clone(), score: score.to_f64_lossy() })
}

/// Label is `score ≥ tau` and the mention is not filtered.
pub fn label_at_threshold(scored: &[ScoredMention], tau: f64) -> Vec<(Mention, bool)> {
    scored.iter().map(|s| (s.mention.clone(), is_positive(s, tau))).collect()
}

pub fn is_positive(s: &ScoredMention, tau: f64) -> bool {
    !s.mention.filtered && s.score >= tau
}

/// Strictly increasing thresholds within [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    thresholds: Vec<f64>,
}

impl ThresholdSweep {
    pub fn new(thresholds: Vec<f64>) -> Result<Self, SelfLabelError> {
        if thresholds.is_empty() {
            return Err(SelfLabelError::Sweep("no thresholds".into()));
        }
        if thresholds.iter().any(|t| !(-1.0..=1.0).contains(t)) {
            return Err(SelfLabelError::Sweep("thresholds must lie in [-1, 1]".into()));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SelfLabelError::Sweep("thresholds must be strictly increasing".into()));
        }
        Ok(ThresholdSweep { thresholds })
    }

    /// `steps` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, steps: usize) -> Result<Self, SelfLabelError> {
        if steps < 2 {
            return Self::new(vec![start]);
        }
        let span = stop - start;
        let last = (steps - 1) as f64;
        Self::new((0..steps).map(|i| start + span * i as f64 / last).collect())
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

impl Default for ThresholdSweep {
    /// 0.00, 0.05, …, 1.00
    fn default() -> Self {
        ThresholdSweep { thresholds: (0..=20).map(|i| i as f64 / 20.0).collect() }
    }
}

pub fn write_scored_jsonl(scored: &[ScoredMention]) -> String {
    let mut sorted: Vec<&ScoredMention> = scored.iter().collect();
    sorted.sort_by(|a, b| {
        let key = |s: &ScoredMention| (s.mention.doc_id.clone(), s.mention.start, s.mention.concept_id.clone());
        key(a).cmp(&key(b))
    });
    let mut out = String::new();
    for s in sorted {
        out.push_str(&serde_json::to_string(s).expect("scored mention serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_scored_jsonl(text: &str) -> Result<Vec<ScoredMention>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// `doc_id,start,end,concept_id,score,label`
pub fn write_labels_csv(scored: &[ScoredMention], tau: f64) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["doc_id", "start", "end", "concept_id", "score", "label"]).expect("csv header");
    for s in scored {
        let m = &s.mention;
        w.write_record([
            m.doc_id.clone(),
            m.start.to_string(),
            m.end.to_string(),
            m.concept_id.to_string(),
            s.score.to_string(),
            is_positive(s, tau).to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
