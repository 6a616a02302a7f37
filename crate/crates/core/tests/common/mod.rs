#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ace_selfsup::config::PipelineConfig;
use ace_selfsup::ingest::{Corpus, Document};
use ace_selfsup::matrix::DocConceptMatrix;
use ace_selfsup::lexicon::{Concept, ConceptId, Lexicon};
use ace_selfsup::ner::Mention;
use proptest::prelude::*;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("repo root")
}

/// The bundled config with its output redirected to `out`.
pub fn bundled_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(repo_root().join("config/pipeline.toml")).expect("bundled config");
    cfg.paths.output_dir = out.to_path_buf();
    cfg
}

pub fn cid(i: usize) -> ConceptId {
    ConceptId::new(format!("C{i:02}"))
}

/// Concept `i` gets the parents listed in `parents[i]`; every listed parent
/// index must be below `i`, which keeps the graph acyclic.
pub fn dag_lexicon(parents: &[Vec<usize>]) -> Lexicon {
    let concepts = parents
        .iter()
        .enumerate()
        .map(|(i, ps)| Concept {
            id: cid(i),
            preferred_name: format!("term {i}"),
            synonyms: Vec::new(),
            parents: ps.iter().map(|&p| cid(p)).collect(),
            group: "g".into(),
        })
        .collect();
    Lexicon::from_concepts(concepts).expect("acyclic by construction")
}

/// Random DAGs with up to `max_n` nodes; edges only point to lower indices.
pub fn dag_strategy(max_n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::vec(0u8..100, max_n), n).prop_map(|bits| {
            bits.iter()
                .enumerate()
                .map(|(i, row)| (0..i).filter(|&j| row[j] < 15).collect())
                .collect()
        })
    })
}

/// One concept per entry, with the given terms; the first is preferred.
pub fn term_lexicon(entries: &[(&str, &[&str])]) -> Lexicon {
    let concepts = entries
        .iter()
        .map(|(id, terms)| Concept {
            id: ConceptId::new(*id),
            preferred_name: terms[0].to_string(),
            synonyms: terms[1..].iter().map(|s| s.to_string()).collect(),
            parents: Vec::new(),
            group: "g".into(),
        })
        .collect();
    Lexicon::from_concepts(concepts).expect("valid lexicon")
}

pub fn all_ids(lex: &Lexicon) -> BTreeSet<ConceptId> {
    lex.ids().cloned().collect()
}

pub fn mention(doc: &str, concept: &str, start: usize, end: usize, filtered: bool) -> Mention {
    Mention {
        doc_id: doc.into(),
        concept_id: concept.into(),
        start,
        end,
        surface: "x".repeat(end - start),
        filtered,
        filter_reason: filtered.then(|| "negation:no".to_string()),
    }
}

pub fn read_dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).expect("readable file");
                out.push((path.strip_prefix(dir).expect("inside dir").to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

/// Central-difference gradient of the batch loss, in `params()` order.
pub fn numeric_gradient(
    model: &ace_selfsup::Autoencoder,
    batch: &[ace_selfsup::ConceptVec],
    h: f64,
) -> Vec<f64> {
    (0..model.param_count())
        .map(|i| {
            let mut plus = model.clone();
            *plus.param_mut(i) += h;
            let mut minus = model.clone();
            *minus.param_mut(i) -= h;
            let lp = plus.loss_and_gradients(batch).unwrap().0;
            let lm = minus.loss_and_gradients(batch).unwrap().0;
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖ / (‖a‖ + ‖b‖), zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        0.0
    } else {
        diff / norm
    }
}

/// Random model with nonzero biases, plus a batch of inputs.
pub fn random_model(
    m: usize,
    k: usize,
    activation: ace_selfsup::autoencoder::Activation,
    seed: u64,
) -> (ace_selfsup::Autoencoder, Vec<ace_selfsup::ConceptVec>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let model = ace_selfsup::Autoencoder::from_params(m, k, activation, v(k * m), v(k), v(m * k), v(m)).unwrap();
    let batch = (0..3).map(|_| ace_selfsup::ConceptVec::new(v(m))).collect();
    (model, batch)
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// `n` vectors `B·z` in a random `k`-dimensional subspace of `m` dimensions.
pub fn subspace_data(m: usize, k: usize, n: usize, seed: u64) -> Vec<ace_selfsup::ConceptVec> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = (0..m).map(|i| (0..k).map(|j| basis[i * k + j] * z[j]).sum::<f64>() / (k as f64).sqrt()).collect();
            ace_selfsup::ConceptVec::new(v)
        })
        .collect()
}

/// `(n_docs, n_concepts, [(doc, concept, filtered)])`
pub type Raw = (usize, usize, Vec<(usize, usize, bool)>);

pub fn materialize(&(n, m, ref raw): &Raw) -> (Corpus, Vec<Mention>, Lexicon) {
    let corpus = Corpus::new((0..n).map(|d| Document::new(format!("d{d:02}"), "")).collect()).unwrap();
    let lex = dag_lexicon(&vec![Vec::new(); m]);
    let mentions = raw.iter().map(|&(d, c, f)| mention(&format!("d{d:02}"), &format!("C{c:02}"), 0, 1, f)).collect();
    (corpus, mentions, lex)
}

/// Dense X by direct counting, with the observed-concept column order.
pub fn dense_x(&(n, m, ref raw): &Raw) -> (Vec<ConceptId>, Vec<Vec<u32>>) {
    let observed: Vec<usize> = (0..m).filter(|&c| raw.iter().any(|&(_, rc, f)| rc == c && !f)).collect();
    let mut x = vec![vec![0u32; observed.len()]; n];
    for &(d, c, f) in raw {
        if !f {
            let col = observed.iter().position(|&o| o == c).unwrap();
            x[d][col] += 1;
        }
    }
    (observed.iter().map(|&c| ConceptId::new(format!("C{c:02}"))).collect(), x)
}

/// Bᵀ·B with B the binarized X.
pub fn dense_cooc(x: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let m = x.first().map_or(0, Vec::len);
    let mut c = vec![vec![0u32; m]; m];
    for row in x {
        for i in 0..m {
            for j in 0..m {
                c[i][j] += u32::from(row[i] > 0) * u32::from(row[j] > 0);
            }
        }
    }
    c
}

pub fn to_dense(x: &DocConceptMatrix) -> Vec<Vec<u32>> {
    (0..x.n_docs()).map(|d| (0..x.m_concepts()).map(|c| x.get(d, c)).collect()).collect()
}
