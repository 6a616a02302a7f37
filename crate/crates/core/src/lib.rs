//! Ontology-driven self-supervision for concept mention labeling.
//!
//! The pipeline runs in stages:
//!
//! 1. [`lexicon`]: load a concept term list with hierarchy, pick leaf concepts
//!    and descendant closures, and compile a matching [`lexicon::Vocabulary`].
//! 2. [`ingest`]: read a JSONL corpus into canonical document order.
//! 3. [`ner`]: token-aligned longest-match dictionary NER plus negation and
//!    stop-list filter rules.
//! 4. [`matrix`]: the document-concept count matrix, the concept co-occurrence
//!    matrix whose rows are concept embeddings, and cosine similarity.
//! 5. [`autoencoder`]: a small linear/sigmoid autoencoder that compresses the
//!    embeddings.
//! 6. [`selflabel`]: score each mention against its leave-one-out document
//!    context and label it by threshold.
//! 7. [`eval`]: precision/recall/F1 against gold span annotations, threshold
//!    sweeps and PR-AUC.
//!
//! [`pipeline`] wires the stages together for the `ace-selfsup` binary and
//! [`synth`] generates the bundled synthetic corpus.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation used by the pipeline.

pub mod autoencoder;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod lexicon;
pub mod matrix;
pub mod ner;
pub mod pipeline;
pub mod scalar;
pub mod selflabel;
pub mod synth;

mod error;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense concept vector in double precision.
pub type ConceptVec = matrix::ConceptVector<f64>;
/// Single-precision concept vector.
pub type ConceptVec32 = matrix::ConceptVector<f32>;
/// Double-precision autoencoder.
pub type Autoencoder = autoencoder::AeModel<f64>;
/// Single-precision autoencoder.
pub type Autoencoder32 = autoencoder::AeModel<f32>;
/// Double-precision gradient set.
pub type AeGradients = autoencoder::Gradients<f64>;
/// Concept id → embedding table in double precision.
pub type Embeddings = selflabel::EmbeddingTable<f64>;
