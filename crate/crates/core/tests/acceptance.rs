//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use ace_selfsup::autoencoder::{init_model, train, AeConfig, Activation};
use ace_selfsup::eval::{compute_metrics, positive_span_set, pr_sweep, ConfusionCounts, GoldAnnotation, GoldLabel, GoldSet};
use ace_selfsup::ingest::{Corpus, Document};
use ace_selfsup::lexicon::build_vocabulary;
use ace_selfsup::matrix::{build_cooc_matrix, build_doc_concept_matrix, cosine_similarity, ConceptVector};
use ace_selfsup::ner::find_mentions;
use ace_selfsup::pipeline::{cmd_run, RunOptions};
use ace_selfsup::selflabel::{label_at_threshold, ScoredMention, ThresholdSweep};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const F1_TOL: f64 = 1e-3;
const COSINE_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const AE_MSE_MAX: f64 = 1e-3;
const AE_CORR_MIN: f64 = 0.99;
const AE_MAX_EPOCHS: usize = 2000;
const AUC_GAP_MAX: f64 = 0.05;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Counts chosen so that P = 0.853 and R = 0.707 exactly.
fn metric_consistency() -> Result<String, String> {
    let (tp, fp, fn_) = (603_071, 103_929, 249_929);
    for scale in [1u64, 2, 7] {
        let m = compute_metrics(ConfusionCounts::new(tp * scale, fp * scale, fn_ * scale));
        ensure((m.precision - 0.853).abs() < 1e-12 && (m.recall - 0.707).abs() < 1e-12, || {
            format!("counts do not give P=0.853, R=0.707: {m:?}")
        })?;
        ensure((m.f1 - 0.773).abs() <= F1_TOL, || format!("F1 {} outside 0.773 ± {F1_TOL}", m.f1))?;
    }
    let m = compute_metrics(ConfusionCounts::new(tp, fp, fn_));
    Ok(format!("F1 = {:.5}", m.f1))
}

fn matrix_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut nnz = 0;
    for case in 0..200 {
        let (n, m) = (rng.gen_range(1..=20), rng.gen_range(1..=15));
        let mentions = (0..rng.gen_range(0..80)).map(|_| (rng.gen_range(0..n), rng.gen_range(0..m), rng.gen_bool(0.2))).collect();
        let raw: Raw = (n, m, mentions);
        let (corpus, mentions, lex) = materialize(&raw);
        let x = build_doc_concept_matrix(&corpus, &mentions, &lex).map_err(|e| e.to_string())?;
        let (ids, dense) = dense_x(&raw);
        ensure(x.concept_ids() == ids.as_slice() && to_dense(&x) == dense, || format!("case {case}: X differs from oracle"))?;
        let c = build_cooc_matrix(&x);
        let oracle = dense_cooc(&dense);
        for i in 0..c.m_concepts() {
            let df = dense.iter().filter(|r| r[i] > 0).count() as u32;
            ensure(c.get(i, i) == df, || format!("case {case}: diagonal {i} is not document frequency"))?;
            for j in 0..c.m_concepts() {
                ensure(c.get(i, j) == oracle[i][j], || format!("case {case}: C[{i},{j}] differs from BᵀB"))?;
                ensure(c.get(i, j) == c.get(j, i), || format!("case {case}: C not symmetric at ({i},{j})"))?;
            }
        }
        nnz += x.nnz();
    }
    Ok(format!("200 corpora, {nnz} nonzeros checked"))
}

fn cosine_direct(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn cosine_fidelity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..50);
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let got = cosine_similarity(&ConceptVector::new(a.clone()), &ConceptVector::new(b.clone())).map_err(|e| e.to_string())?;
        worst = worst.max((got - cosine_direct(&a, &b)).abs());
    }
    ensure(worst <= COSINE_TOL, || format!("max deviation {worst:e} > {COSINE_TOL:e}"))?;
    for _ in 0..200 {
        let d = rng.gen_range(1..50);
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let mut orth = vec![0.0; d + 1];
        orth[d] = rng.gen_range(0.5..5.0);
        let mut padded = a.clone();
        padded.push(0.0);
        let v = |x: &[f64]| ConceptVector::new(x.to_vec());
        let same = cosine_similarity(&v(&a), &v(&a)).unwrap();
        let opposite = cosine_similarity(&v(&a), &v(&neg)).unwrap();
        let zero = cosine_similarity(&v(&padded), &v(&orth)).unwrap();
        ensure(same == 1.0 && opposite == -1.0 && zero == 0.0, || {
            format!("boundary values not exact: {same}, {opposite}, {zero}")
        })?;
    }
    Ok(format!("max |Δ| = {worst:.1e} over 1000 pairs; boundaries exact"))
}

fn gradient_check() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (m, k) in [(4, 2), (6, 3)] {
        for act in [Activation::Identity, Activation::Sigmoid] {
            for seed in 0..5 {
                let (model, batch) = random_model(m, k, act, 100 + seed);
                let (_, grads) = model.loss_and_gradients(&batch).map_err(|e| e.to_string())?;
                let err = relative_error(&grads.flat(), &numeric_gradient(&model, &batch, FD_STEP));
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    ensure(worst < FD_REL_TOL, || format!("worst relative error {worst:e}"))?;
    Ok(format!("{count} models, worst relative error {worst:.1e}"))
}

fn autoencoder_fidelity() -> Result<String, String> {
    let (m, k) = (40, 8);
    let data = subspace_data(m, k, 40, 5);
    let mut cfg = AeConfig::new(m, k);
    cfg.learning_rate = 0.5;
    cfg.epochs = AE_MAX_EPOCHS;
    cfg.batch_size = 8;
    cfg.seed = 5;
    let (model, report) = train(init_model::<f64>(&cfg).map_err(|e| e.to_string())?, &data, &cfg).map_err(|e| e.to_string())?;
    let (orig, rec): (Vec<f64>, Vec<f64>) = data
        .iter()
        .flat_map(|x| x.values().iter().copied().zip(model.forward(x).unwrap().1.into_values()).collect::<Vec<_>>())
        .unzip();
    let corr = correlation(&orig, &rec);
    ensure(report.final_loss < AE_MSE_MAX && corr > AE_CORR_MIN, || {
        format!("MSE {:.2e}, correlation {corr:.5}", report.final_loss)
    })?;
    Ok(format!("MSE {:.2e}, correlation {corr:.5} after {} epochs", report.final_loss, cfg.epochs))
}

fn auc_preservation() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = bundled_config(dir.path());
    let s = cmd_run(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    let (n, m, k) = (s.n_docs.unwrap(), s.m_concepts.unwrap(), s.encoded_dim.unwrap());
    ensure(n >= 200 && m >= 30, || format!("bundled corpus too small: {n} docs, {m} concepts"))?;
    ensure(k == m / 4, || format!("encoded_dim {k} is not m/4 = {}", m / 4))?;
    let auc = s.eval.unwrap().auc;
    ensure(auc.gap <= AUC_GAP_MAX, || format!("raw {:.4}, encoded {:.4}, gap {:.4}", auc.raw, auc.encoded, auc.gap))?;
    Ok(format!("m={m}, k={k}: raw {:.4}, encoded {:.4}, gap {:.4}", auc.raw, auc.encoded, auc.gap))
}

fn ner_golden() -> Result<String, String> {
    let text = include_str!("fixtures/forum_passage.txt");
    let lex = term_lexicon(&[
        ("MD", &["mental disorder"]),
        ("MS", &["mood swings"]),
        ("BPD", &["borderline personality disorder", "BPD"]),
        ("PD", &["personality disorder"]),
        ("SH", &["self harm"]),
        ("SP", &["social phobia"]),
        ("PH", &["phobia"]),
        ("DE", &["destructive"]),
        ("SA", &["sad"]),
    ]);
    let vocab = build_vocabulary(&lex, &all_ids(&lex)).map_err(|e| e.to_string())?;
    let found: BTreeSet<(usize, usize, String)> = find_mentions(&Document::new("fig", text), &vocab)
        .into_iter()
        .map(|m| (m.start, m.end, m.concept_id.to_string()))
        .collect();
    let highlighted = [
        ("mental disorder", "MD"),
        ("mood swings", "MS"),
        ("borderline personality disorder", "BPD"),
        ("BPD", "BPD"),
        ("self harm", "SH"),
        ("destructive", "DE"),
        ("sad", "SA"),
        ("social phobia", "SP"),
    ];
    let expected: BTreeSet<(usize, usize, String)> = highlighted
        .iter()
        .flat_map(|(s, c)| text.match_indices(s).map(move |(i, _)| (i, i + s.len(), c.to_string())))
        .collect();
    ensure(found == expected, || {
        format!("missing {:?}, extra {:?}", expected.difference(&found).collect::<Vec<_>>(), found.difference(&expected).collect::<Vec<_>>())
    })?;
    Ok(format!("{} highlighted spans at exact offsets, nested terms suppressed", found.len()))
}

fn threshold_monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = Corpus::new(vec![Document::new("d", "x".repeat(200))]).unwrap();
    let labels = [GoldLabel::NlpTrue, GoldLabel::NotAces, GoldLabel::ManualAces];
    let mut points = 0;
    for case in 0..100 {
        let scored: Vec<ScoredMention> = (0..rng.gen_range(0..30))
            .map(|_| {
                let slot = rng.gen_range(0..30) * 5;
                let concept = ["A", "B", "C"][rng.gen_range(0..3)];
                ScoredMention { mention: mention("d", concept, slot, slot + 3, rng.gen_bool(0.15)), score: rng.gen_range(-1.0..=1.0) }
            })
            .collect();
        let gold: Vec<GoldAnnotation> = (0..rng.gen_range(0..20))
            .map(|_| {
                let slot = rng.gen_range(0..30) * 5;
                GoldAnnotation { doc_id: "d".into(), start: slot, end: slot + 3, concept_id: None, label: labels[rng.gen_range(0..3)] }
            })
            .collect();
        let gold = GoldSet::new(gold, &corpus).map_err(|e| e.to_string())?;
        let mut taus: Vec<f64> = (0..rng.gen_range(2..25)).map(|_| (rng.gen_range(-1.0f64..=1.0) * 100.0).round() / 100.0).collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let sets: Vec<_> = taus.iter().map(|&t| positive_span_set(&label_at_threshold(&scored, t))).collect();
        ensure(sets.windows(2).all(|w| w[1].is_subset(&w[0])), || format!("case {case}: positive sets not nested"))?;
        let sweep = ThresholdSweep::new(taus).map_err(|e| e.to_string())?;
        let pr = pr_sweep(&scored, &gold, &sweep);
        ensure(pr.windows(2).all(|w| w[1].recall <= w[0].recall), || format!("case {case}: recall increased"))?;
        points += pr.len();
    }
    Ok(format!("100 configurations, {points} sweep points"))
}

fn run_into(dir: &Path, threads: usize) -> Result<Vec<(std::path::PathBuf, Vec<u8>)>, String> {
    let mut cfg = bundled_config(dir);
    cfg.threads = threads;
    cmd_run(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    Ok(read_dir_bytes(dir))
}

fn determinism() -> Result<String, String> {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = run_into(dirs[0].path(), 1)?;
    let b = run_into(dirs[1].path(), 1)?;
    let c = run_into(dirs[2].path(), 4)?;
    let names = |v: &[(std::path::PathBuf, Vec<u8>)]| v.iter().map(|(p, _)| p.display().to_string()).collect::<Vec<_>>();
    ensure(a == b, || format!("repeat run differs: {:?}", names(&a)))?;
    ensure(a == c, || "1-thread and 4-thread runs differ".to_string())?;
    let bytes: usize = a.iter().map(|(_, b)| b.len()).sum();
    Ok(format!("{} artifacts ({bytes} bytes) identical across 3 runs", a.len()))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("metric consistency (F1 from P=0.853, R=0.707)", metric_consistency),
        ("matrix oracle equivalence", matrix_oracles),
        ("cosine similarity fidelity", cosine_fidelity),
        ("autoencoder gradient check", gradient_check),
        ("autoencoder fidelity on subspace data", autoencoder_fidelity),
        ("PR-AUC preserved under compression", auc_preservation),
        ("NER golden passage", ner_golden),
        ("threshold monotonicity", threshold_monotonicity),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
