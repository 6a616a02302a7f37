//! Document-concept and concept co-occurrence matrices, concept embeddings
//! and cosine similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::Corpus;
use crate::lexicon::{ConceptId, Lexicon};
use crate::ner::Mention;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("mention references unknown document {0:?}")]
    UnknownDocument(String),
    #[error("mention references unknown concept {0}")]
    UnknownConcept(ConceptId),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{what} index {index} out of range (size {size})")]
    OutOfRange { what: &'static str, index: usize, size: usize },
    #[error("sparse matrix line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Dense real vector: a raw co-occurrence row, or its encoded form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ConceptVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        ConceptVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        ConceptVector { values: vec![T::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Unit L2 norm; zero vectors come back unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == T::zero() {
            return self.clone();
        }
        ConceptVector { values: self.values.iter().map(|&v| v / n).collect() }
    }

    pub fn scaled(&self, by: T) -> Self {
        ConceptVector { values: self.values.iter().map(|&v| v * by).collect() }
    }

    pub(crate) fn add_scaled(&mut self, other: &Self, by: T) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + b * by;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> From<Vec<T>> for ConceptVector<T> {
    fn from(values: Vec<T>) -> Self {
        ConceptVector { values }
    }
}

/// `Σ aᵢbᵢ / (√Σaᵢ² · √Σbᵢ²)`, defined as 0 when either norm is 0.
pub fn cosine_similarity<T: Scalar>(a: &ConceptVector<T>, b: &ConceptVector<T>) -> Result<T, MatrixError> {
    if a.dim() != b.dim() {
        return Err(MatrixError::Dimension { expected: a.dim(), got: b.dim() });
    }
    let (mut dot, mut aa, mut bb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.values.iter().zip(&b.values) {
        dot = dot + x * y;
        aa = aa + x * x;
        bb = bb + y * y;
    }
    if aa == T::zero() || bb == T::zero() {
        return Ok(T::zero());
    }
    // sqrt(aa·bb) rather than sqrt(aa)·sqrt(bb): sqrt(fl(x²)) == |x| exactly,
    // so identical and opposite vectors give exactly ±1.
    let cos = dot / (aa * bb).sqrt();
    Ok(cos.max(-T::one()).min(T::one()))
}

/// Sparse n×m matrix of unfiltered mention counts.
///
/// Columns are only the concepts observed at least once, in lexicon order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocConceptMatrix {
    doc_ids: Vec<String>,
    concept_ids: Vec<ConceptId>,
    /// Per document: `(concept column, count)` sorted by column, counts ≥ 1.
    rows: Vec<Vec<(u32, u32)>>,
}

impl DocConceptMatrix {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn m_concepts(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn concept_ids(&self) -> &[ConceptId] {
        &self.concept_ids
    }

    pub fn concept_index(&self, id: &ConceptId) -> Option<usize> {
        self.concept_ids.binary_search(id).ok()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(doc_id)).ok()
    }

    pub fn row(&self, doc: usize) -> &[(u32, u32)] {
        &self.rows[doc]
    }

    pub fn get(&self, doc: usize, concept: usize) -> u32 {
        self.rows[doc]
            .binary_search_by_key(&(concept as u32), |&(c, _)| c)
            .map(|i| self.rows[doc][i].1)
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `(doc, concept, count)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(d, row)| row.iter().map(move |&(c, v)| (d, c as usize, v)))
    }

    /// Rebuilds from triplets, e.g. read back from a sparse file. Zero counts
    /// are dropped; duplicates are summed.
    pub fn from_parts(
        doc_ids: Vec<String>,
        concept_ids: Vec<ConceptId>,
        triplets: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, MatrixError> {
        let (n, m) = (doc_ids.len(), concept_ids.len());
        let mut acc: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); n];
        for (d, c, v) in triplets {
            if d >= n {
                return Err(MatrixError::OutOfRange { what: "document", index: d, size: n });
            }
            if c >= m {
                return Err(MatrixError::OutOfRange { what: "concept", index: c, size: m });
            }
            if v > 0 {
                *acc[d].entry(c as u32).or_default() += v;
            }
        }
        let rows = acc.into_iter().map(|r| r.into_iter().collect()).collect();
        Ok(DocConceptMatrix { doc_ids, concept_ids, rows })
    }
}

/// Counts unfiltered mentions per (document, concept).
pub fn build_doc_concept_matrix(
    corpus: &Corpus,
    mentions: &[Mention],
    lexicon: &Lexicon,
) -> Result<DocConceptMatrix, MatrixError> {
    for m in mentions {
        if corpus.index_of(&m.doc_id).is_none() {
            return Err(MatrixError::UnknownDocument(m.doc_id.clone()));
        }
        if !lexicon.contains(&m.concept_id) {
            return Err(MatrixError::UnknownConcept(m.concept_id.clone()));
        }
    }
    let live = || mentions.iter().filter(|m| !m.filtered);
    let observed: BTreeSet<&ConceptId> = live().map(|m| &m.concept_id).collect();
    let concept_ids: Vec<ConceptId> = observed.into_iter().cloned().collect();
    let doc_ids: Vec<String> = corpus.docs().iter().map(|d| d.doc_id.clone()).collect();

    let col = |id: &ConceptId| concept_ids.binary_search(id).expect("observed concept") as u32;
    let mut acc: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); doc_ids.len()];
    for m in live() {
        let d = corpus.index_of(&m.doc_id).expect("validated");
        *acc[d].entry(col(&m.concept_id)).or_default() += 1;
    }
    let rows = acc.into_iter().map(|r| r.into_iter().collect()).collect();
    Ok(DocConceptMatrix { doc_ids, concept_ids, rows })
}

/// Symmetric m×m count of documents in which two concepts both occur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoocMatrix {
    concept_ids: Vec<ConceptId>,
    rows: Vec<Vec<(u32, u32)>>,
}

impl CoocMatrix {
    pub fn m_concepts(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn concept_ids(&self) -> &[ConceptId] {
        &self.concept_ids
    }

    pub fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.rows[i]
            .binary_search_by_key(&(j as u32), |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j as usize, v)))
    }

    pub fn from_parts(
        concept_ids: Vec<ConceptId>,
        triplets: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, MatrixError> {
        let m = concept_ids.len();
        let mut acc: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); m];
        for (i, j, v) in triplets {
            for idx in [i, j] {
                if idx >= m {
                    return Err(MatrixError::OutOfRange { what: "concept", index: idx, size: m });
                }
            }
            if v > 0 {
                *acc[i].entry(j as u32).or_default() += v;
            }
        }
        let rows = acc.into_iter().map(|r| r.into_iter().collect()).collect();
        Ok(CoocMatrix { concept_ids, rows })
    }
}

/// Binary document-level co-occurrence: entry (i, j) is the number of
/// documents containing both concepts; the diagonal is document frequency.
pub fn build_cooc_matrix(x: &DocConceptMatrix) -> CoocMatrix {
    let m = x.m_concepts();
    let mut acc: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); m];
    for row in &x.rows {
        for &(i, _) in row {
            let target = &mut acc[i as usize];
            for &(j, _) in row {
                *target.entry(j).or_default() += 1;
            }
        }
    }
    CoocMatrix {
        concept_ids: x.concept_ids.clone(),
        rows: acc.into_iter().map(|r| r.into_iter().collect()).collect(),
    }
}

/// Row `i` of the co-occurrence matrix as a dense vector.
pub fn concept_embedding<T: Scalar>(
    cooc: &CoocMatrix,
    i: usize,
    normalized: bool,
) -> Result<ConceptVector<T>, MatrixError> {
    let m = cooc.m_concepts();
    if i >= m {
        return Err(MatrixError::OutOfRange { what: "concept", index: i, size: m });
    }
    let mut v = ConceptVector::zeros(m);
    for &(j, count) in &cooc.rows[i] {
        v.values[j as usize] = T::from_count(count);
    }
    Ok(if normalized { v.normalized() } else { v })
}

/// All rows, in concept order.
pub fn concept_embeddings<T: Scalar>(cooc: &CoocMatrix, normalized: bool) -> Vec<ConceptVector<T>> {
    (0..cooc.m_concepts())
        .map(|i| concept_embedding(cooc, i, normalized).expect("index in range"))
        .collect()
}

/// `Σ X(doc, c) · embedding(c)` over the concepts present in `doc`, skipping
/// `exclude`. `embeddings` is indexed by matrix column.
pub fn document_context_vector<T: Scalar>(
    x: &DocConceptMatrix,
    embeddings: &[ConceptVector<T>],
    doc: usize,
    exclude: Option<usize>,
) -> Result<ConceptVector<T>, MatrixError> {
    if doc >= x.n_docs() {
        return Err(MatrixError::OutOfRange { what: "document", index: doc, size: x.n_docs() });
    }
    if embeddings.len() != x.m_concepts() {
        return Err(MatrixError::Dimension { expected: x.m_concepts(), got: embeddings.len() });
    }
    let dim = embeddings.first().map_or(0, ConceptVector::dim);
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(MatrixError::Dimension { expected: dim, got: bad.dim() });
    }
    let mut ctx = ConceptVector::zeros(dim);
    for &(c, count) in x.row(doc) {
        if Some(c as usize) == exclude {
            continue;
        }
        ctx.add_scaled(&embeddings[c as usize], T::from_count(count));
    }
    Ok(ctx)
}

/// `(rows, cols, triplets)` as read from the sparse text form.
pub type SparseText = (usize, usize, Vec<(usize, usize, u32)>);

/// Text form: header `rows cols nnz`, then `row col value` sorted by (row, col).
pub fn write_sparse(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, u32)>) -> String {
    let triplets: Vec<_> = triplets.into_iter().collect();
    let mut out = format!("{rows} {cols} {}\n", triplets.len());
    for (r, c, v) in triplets {
        writeln!(out, "{r} {c} {v}").expect("write to string");
    }
    out
}

/// Parses [`write_sparse`] output into `(rows, cols, triplets)`.
pub fn parse_sparse(text: &str) -> Result<SparseText, MatrixError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: &str| MatrixError::Parse { line, message: message.to_string() };
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| err(1, "header must be `rows cols nnz`"))?;
    let [rows, cols, nnz] = head[..] else {
        return Err(err(1, "header must be `rows cols nnz`"));
    };
    let mut triplets = Vec::with_capacity(nnz);
    let mut prev: Option<(usize, usize)> = None;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [r, c, v] = parts[..] else {
            return Err(err(i + 1, "expected `row col value`"));
        };
        let (r, c, v): (usize, usize, u32) = match (r.parse(), c.parse(), v.parse()) {
            (Ok(r), Ok(c), Ok(v)) => (r, c, v),
            _ => return Err(err(i + 1, "non-integer entry")),
        };
        if r >= rows || c >= cols {
            return Err(err(i + 1, "index out of range"));
        }
        if prev.is_some_and(|p| p >= (r, c)) {
            return Err(err(i + 1, "triplets not sorted by (row, col)"));
        }
        prev = Some((r, c));
        triplets.push((r, c, v));
    }
    if triplets.len() != nnz {
        return Err(err(1, "nnz does not match triplet count"));
    }
    Ok((rows, cols, triplets))
}

/// One id per line.
pub fn write_id_list<S: AsRef<str>>(ids: &[S]) -> String {
    let mut out = String::new();
    for id in ids {
        out.push_str(id.as_ref());
        out.push('\n');
    }
    out
}

pub fn parse_id_list(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect()
}
