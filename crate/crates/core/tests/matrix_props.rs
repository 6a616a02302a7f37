#![allow(clippy::needless_range_loop)]

mod common;

use ace_selfsup::lexicon::ConceptId;
use ace_selfsup::matrix::{
    build_cooc_matrix, build_doc_concept_matrix, concept_embeddings, cosine_similarity, document_context_vector,
    parse_sparse, write_sparse, ConceptVector,
};
use common::{dense_cooc, dense_x, materialize, mention, to_dense, Raw};
use proptest::prelude::*;

fn corpus_strategy() -> impl Strategy<Value = Raw> {
    (1usize..=20, 1usize..=15).prop_flat_map(|(n, m)| {
        let mention = (0..n, 0..m, prop::bool::weighted(0.2));
        (Just(n), Just(m), prop::collection::vec(mention, 0..80))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrices_equal_dense_oracles(raw in corpus_strategy()) {
        let (corpus, mentions, lex) = materialize(&raw);
        let x = build_doc_concept_matrix(&corpus, &mentions, &lex).unwrap();
        let (ids, dense) = dense_x(&raw);
        prop_assert_eq!(x.concept_ids(), ids.as_slice());
        prop_assert_eq!(to_dense(&x), dense.clone());
        prop_assert!(x.triplets().all(|(_, _, v)| v >= 1));

        let c = build_cooc_matrix(&x);
        let oracle = dense_cooc(&dense);
        let m = c.m_concepts();
        for i in 0..m {
            let df = dense.iter().filter(|r| r[i] > 0).count() as u32;
            prop_assert_eq!(c.get(i, i), df);
            for j in 0..m {
                prop_assert_eq!(c.get(i, j), oracle[i][j]);
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                prop_assert!(c.get(i, j) <= c.get(i, i).min(c.get(j, j)));
            }
        }
    }

    #[test]
    fn sparse_text_round_trips(raw in corpus_strategy()) {
        let (corpus, mentions, lex) = materialize(&raw);
        let x = build_doc_concept_matrix(&corpus, &mentions, &lex).unwrap();
        let text = write_sparse(x.n_docs(), x.m_concepts(), x.triplets());
        let (rows, cols, triplets) = parse_sparse(&text).unwrap();
        prop_assert_eq!((rows, cols), (x.n_docs(), x.m_concepts()));
        prop_assert_eq!(triplets, x.triplets().collect::<Vec<_>>());
    }

    #[test]
    fn context_vector_is_weighted_sum(raw in corpus_strategy(), d in 0usize..20) {
        let (corpus, mentions, lex) = materialize(&raw);
        let x = build_doc_concept_matrix(&corpus, &mentions, &lex).unwrap();
        let d = d % x.n_docs();
        let emb = concept_embeddings::<f64>(&build_cooc_matrix(&x), false);
        let exclude = x.row(d).first().map(|&(c, _)| c as usize);
        let got = document_context_vector(&x, &emb, d, exclude).unwrap();
        let mut want = vec![0.0; x.m_concepts()];
        for c in 0..x.m_concepts() {
            if Some(c) == exclude {
                continue;
            }
            for (w, e) in want.iter_mut().zip(emb[c].values()) {
                *w += f64::from(x.get(d, c)) * e;
            }
        }
        prop_assert_eq!(got.values(), want.as_slice());
    }

    #[test]
    fn cosine_bounds_symmetry_and_scale(
        a in prop::collection::vec(-10.0f64..10.0, 1..12),
        scale in 0.01f64..100.0,
    ) {
        let b: Vec<f64> = a.iter().rev().copied().collect();
        let (va, vb) = (ConceptVector::new(a.clone()), ConceptVector::new(b));
        let ab = cosine_similarity(&va, &vb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, cosine_similarity(&vb, &va).unwrap());
        let scaled = cosine_similarity(&va.scaled(scale), &vb).unwrap();
        prop_assert!((scaled - ab).abs() < 1e-12);
    }
}

#[test]
fn cosine_zero_norm_and_dimension_mismatch() {
    let z = ConceptVector::new(vec![0.0f64; 3]);
    let v = ConceptVector::new(vec![1.0, 2.0, 3.0]);
    assert_eq!(cosine_similarity(&z, &v).unwrap(), 0.0);
    assert!(cosine_similarity(&v, &ConceptVector::new(vec![1.0])).is_err());
}

#[test]
fn filtered_only_concept_gets_no_column() {
    let raw: Raw = (2, 3, vec![(0, 0, false), (1, 2, true), (1, 1, false)]);
    let (corpus, mentions, lex) = materialize(&raw);
    let x = build_doc_concept_matrix(&corpus, &mentions, &lex).unwrap();
    let ids: Vec<&str> = x.concept_ids().iter().map(ConceptId::as_str).collect();
    assert_eq!(ids, ["C00", "C01"]);
}

#[test]
fn unknown_document_or_concept_rejected() {
    let raw: Raw = (1, 1, vec![]);
    let (corpus, _, lex) = materialize(&raw);
    assert!(build_doc_concept_matrix(&corpus, &[mention("zz", "C00", 0, 1, false)], &lex).is_err());
    assert!(build_doc_concept_matrix(&corpus, &[mention("d00", "C77", 0, 1, false)], &lex).is_err());
}
