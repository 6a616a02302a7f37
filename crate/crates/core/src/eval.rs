//! Evaluation against gold span annotations.
//!
//! Gold labels follow the annotation scheme used for the expert set:
//! `NLP_TRUE` marks a span the NER found and that is a genuine concept
//! mention, `Not_ACEs` a span the NER found that is not, and `Manual_ACEs`
//! a genuine mention the NER missed. Matching is on exact
//! `(doc_id, start, end)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Corpus;
use crate::lexicon::ConceptId;
use crate::ner::Mention;
use crate::selflabel::{label_at_threshold, ScoredMention, ThresholdSweep};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read gold file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gold line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("gold annotation {doc_id}[{start}..{end}] is outside its document")]
    OutOfBounds { doc_id: String, start: usize, end: usize },
    #[error("gold annotation references unknown document {0:?}")]
    UnknownDocument(String),
    #[error("PR-AUC needs at least 2 points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GoldLabel {
    #[serde(rename = "NLP_TRUE")]
    NlpTrue,
    #[serde(rename = "Not_ACEs")]
    NotAces,
    #[serde(rename = "Manual_ACEs")]
    ManualAces,
}

impl GoldLabel {
    /// Whether the span is a genuine concept mention.
    pub fn is_true(self) -> bool {
        matches!(self, GoldLabel::NlpTrue | GoldLabel::ManualAces)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_id: Option<ConceptId>,
    pub label: GoldLabel,
}

type SpanKey = (String, usize, usize);

fn key(doc_id: &str, start: usize, end: usize) -> SpanKey {
    (doc_id.to_string(), start, end)
}

/// Gold annotations validated against a corpus.
#[derive(Debug, Clone, Default)]
pub struct GoldSet {
    annotations: Vec<GoldAnnotation>,
    /// Genuine spans and their concept ids (first annotation wins).
    true_spans: BTreeMap<SpanKey, Option<ConceptId>>,
}

impl GoldSet {
    /// Rejects spans outside their document or not on character boundaries.
    pub fn new(annotations: Vec<GoldAnnotation>, corpus: &Corpus) -> Result<Self, EvalError> {
        for a in &annotations {
            let doc = corpus.get(&a.doc_id).ok_or_else(|| EvalError::UnknownDocument(a.doc_id.clone()))?;
            let ok = a.start < a.end
                && a.end <= doc.text.len()
                && doc.text.is_char_boundary(a.start)
                && doc.text.is_char_boundary(a.end);
            if !ok {
                return Err(EvalError::OutOfBounds { doc_id: a.doc_id.clone(), start: a.start, end: a.end });
            }
        }
        let mut true_spans = BTreeMap::new();
        for a in annotations.iter().filter(|a| a.label.is_true()) {
            true_spans.entry(key(&a.doc_id, a.start, a.end)).or_insert_with(|| a.concept_id.clone());
        }
        Ok(GoldSet { annotations, true_spans })
    }

    pub fn annotations(&self) -> &[GoldAnnotation] {
        &self.annotations
    }

    /// Distinct genuine spans (`NLP_TRUE` or `Manual_ACEs`).
    pub fn true_count(&self) -> usize {
        self.true_spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

pub fn parse_gold_jsonl(text: &str) -> Result<Vec<GoldAnnotation>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn load_gold(path: impl AsRef<Path>, corpus: &Corpus) -> Result<GoldSet, EvalError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    GoldSet::new(parse_gold_jsonl(&text)?, corpus)
}

pub fn write_gold_jsonl(annotations: &[GoldAnnotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        out.push_str(&serde_json::to_string(a).expect("gold serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn compute_metrics(c: ConfusionCounts) -> Metrics {
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let tp = c.tp as f64;
    let precision = ratio(tp, tp + c.fp as f64);
    let recall = ratio(tp, tp + c.fn_ as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Metrics { precision, recall, f1 }
}

/// Predicted-positive spans (deduplicated), each with the smallest concept id
/// predicted there.
fn positive_spans(predicted: &[(Mention, bool)]) -> BTreeMap<SpanKey, ConceptId> {
    let mut spans: BTreeMap<SpanKey, ConceptId> = BTreeMap::new();
    for (m, _) in predicted.iter().filter(|(_, label)| *label) {
        spans
            .entry(key(&m.doc_id, m.start, m.end))
            .and_modify(|c| {
                if m.concept_id < *c {
                    *c = m.concept_id.clone();
                }
            })
            .or_insert_with(|| m.concept_id.clone());
    }
    spans
}

/// Exact-span confusion counts.
///
/// A gold genuine span is TP when some positive prediction sits on it and FN
/// otherwise; a positive span that is not a gold genuine span is FP (this
/// includes `Not_ACEs` spans). Several concepts predicted on one span count
/// once, so `tp + fn` always equals [`GoldSet::true_count`].
pub fn match_to_gold(predicted: &[(Mention, bool)], gold: &GoldSet) -> ConfusionCounts {
    let positives = positive_spans(predicted);
    let tp = gold.true_spans.keys().filter(|k| positives.contains_key(*k)).count() as u64;
    let fn_ = gold.true_count() as u64 - tp;
    let fp = positives.keys().filter(|k| !gold.true_spans.contains_key(*k)).count() as u64;
    ConfusionCounts { tp, fp, fn_ }
}

/// Bucket for genuine gold spans without a concept id and without a match.
pub const UNMAPPED: &str = "unmapped";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMetrics {
    pub concept: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Genuine gold spans attributed to this concept (`tp + fn`).
    pub support: u64,
}

/// Partitions the [`match_to_gold`] counts by concept; the per-concept counts
/// sum to the global ones.
///
/// TP and FN go to the gold span's concept; a gold span without a concept id
/// takes the matched prediction's concept, or [`UNMAPPED`] when unmatched.
/// FP goes to the predicted concept.
pub fn per_concept_metrics(predicted: &[(Mention, bool)], gold: &GoldSet) -> BTreeMap<String, ConceptMetrics> {
    let positives = positive_spans(predicted);
    let mut counts: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for (span, gold_concept) in &gold.true_spans {
        let matched = positives.get(span);
        let bucket = match (gold_concept, matched) {
            (Some(c), _) => c.to_string(),
            (None, Some(p)) => p.to_string(),
            (None, None) => UNMAPPED.to_string(),
        };
        let entry = counts.entry(bucket).or_default();
        if matched.is_some() {
            entry.tp += 1;
        } else {
            entry.fn_ += 1;
        }
    }
    for (span, concept) in &positives {
        if !gold.true_spans.contains_key(span) {
            counts.entry(concept.to_string()).or_default().fp += 1;
        }
    }
    counts
        .into_iter()
        .map(|(concept, c)| {
            let cm = ConceptMetrics { concept: concept.clone(), counts: c, metrics: compute_metrics(c), support: c.tp + c.fn_ };
            (concept, cm)
        })
        .collect()
}

/// The `top` concepts by support (ties by id), then the macro average of the
/// remaining concepts as an "all others" row when any remain.
pub fn top_concepts_with_others(
    per_concept: &BTreeMap<String, ConceptMetrics>,
    top: usize,
) -> (Vec<ConceptMetrics>, Option<ConceptMetrics>) {
    let mut rows: Vec<&ConceptMetrics> = per_concept.values().collect();
    rows.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.concept.cmp(&b.concept)));
    let head = rows.iter().take(top).map(|r| (*r).clone()).collect();
    let rest: Vec<&ConceptMetrics> = rows.into_iter().skip(top).collect();
    if rest.is_empty() {
        return (head, None);
    }
    let n = rest.len() as f64;
    let mut counts = ConfusionCounts::default();
    let mut sum = Metrics::default();
    for r in &rest {
        counts += r.counts;
        sum.precision += r.metrics.precision;
        sum.recall += r.metrics.recall;
        sum.f1 += r.metrics.f1;
    }
    let others = ConceptMetrics {
        concept: "all others".to_string(),
        counts,
        metrics: Metrics { precision: sum.precision / n, recall: sum.recall / n, f1: sum.f1 / n },
        support: counts.tp + counts.fn_,
    };
    (head, Some(others))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One PR point per threshold, in threshold order.
pub fn pr_sweep(scored: &[ScoredMention], gold: &GoldSet, sweep: &ThresholdSweep) -> Vec<PrPoint> {
    sweep
        .thresholds()
        .iter()
        .map(|&tau| {
            let m = compute_metrics(match_to_gold(&label_at_threshold(scored, tau), gold));
            PrPoint { threshold: tau, precision: m.precision, recall: m.recall }
        })
        .collect()
}

/// Trapezoidal area under precision-vs-recall.
///
/// Points are sorted by recall; points sharing a recall value are replaced by
/// one point with their mean precision. Point order does not matter.
pub fn pr_auc(points: &[PrPoint]) -> Result<f64, EvalError> {
    if points.len() < 2 {
        return Err(EvalError::TooFewPoints(points.len()));
    }
    let mut by_recall: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for p in points {
        // Recall is non-negative, so bit order is numeric order.
        let e = by_recall.entry((p.recall + 0.0).to_bits()).or_insert((p.recall, 0.0, 0));
        e.1 += p.precision;
        e.2 += 1;
    }
    let curve: Vec<(f64, f64)> = by_recall.into_values().map(|(r, sum, n)| (r, sum / n as f64)).collect();
    Ok(curve.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum())
}

/// `threshold,precision,recall`
pub fn write_pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    out
}

/// Span sets of the predicted positives at one threshold, for diagnostics.
pub fn positive_span_set(predicted: &[(Mention, bool)]) -> BTreeSet<(String, usize, usize)> {
    positive_spans(predicted).into_keys().collect()
}
