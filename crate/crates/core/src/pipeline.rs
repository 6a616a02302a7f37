//! End-to-end orchestration behind the `lexicon`, `run` and `report`
//! subcommands.
//!
//! Every stage writes its artifacts into the output directory. A run may
//! start at a later stage (`from`), in which case earlier stages' artifacts
//! are read back instead of recomputed, and may stop early (`until`).
//! Document-level work is spread over a rayon pool of `threads` workers;
//! results are gathered in canonical order, so the thread count never
//! changes output bytes.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::autoencoder::{encode_all, init_model, model_from_json, model_to_json, train, AeModel, TrainReport};
use crate::config::{PipelineConfig, Selection};
use crate::eval::{
    compute_metrics, load_gold, match_to_gold, per_concept_metrics, pr_auc, pr_sweep, top_concepts_with_others,
    write_pr_csv, ConceptMetrics, ConfusionCounts, GoldSet, Metrics, PrPoint,
};
use crate::ingest::{load_corpus, Corpus};
use crate::lexicon::{build_vocabulary, expand_descendants, extract_leaf_concepts, load_lexicon, ConceptId, Lexicon};
use crate::matrix::{
    build_cooc_matrix, build_doc_concept_matrix, concept_embeddings, parse_id_list, parse_sparse, write_id_list,
    write_sparse, CoocMatrix, DocConceptMatrix,
};
use crate::ner::{apply_filter_rules, find_mentions, parse_mentions_jsonl, write_mentions_jsonl, Mention};
use crate::selflabel::{
    label_at_threshold, parse_scored_jsonl, score_mentions, write_labels_csv, write_scored_jsonl, EmbeddingTable,
    ScoredMention,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Lexicon,
    Ner,
    Matrix,
    Autoencoder,
    Score,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Lexicon, Stage::Ner, Stage::Matrix, Stage::Autoencoder, Stage::Score, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Lexicon => "lexicon",
            Stage::Ner => "ner",
            Stage::Matrix => "matrix",
            Stage::Autoencoder => "autoencoder",
            Stage::Score => "score",
            Stage::Eval => "eval",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}; expected one of lexicon, ner, matrix, autoencoder, score, eval"))
    }
}

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const CONCEPTS: &str = "selected_concepts.tsv";
    pub const MENTIONS: &str = "mentions.jsonl";
    pub const DOC_CONCEPT: &str = "doc_concept.mtx";
    pub const COOC: &str = "cooc.mtx";
    pub const DOC_ORDER: &str = "doc_order.txt";
    pub const CONCEPT_ORDER: &str = "concept_order.txt";
    pub const MODEL: &str = "autoencoder.json";
    pub const TRAIN_REPORT: &str = "train_report.json";
    pub const ENCODED_EMBEDDINGS: &str = "encoded_embeddings.tsv";
    pub const SCORED_RAW: &str = "scored_raw.jsonl";
    pub const SCORED_ENCODED: &str = "scored_encoded.jsonl";
    pub const PR_RAW: &str = "pr_raw.csv";
    pub const PR_ENCODED: &str = "pr_encoded.csv";
    pub const METRICS: &str = "metrics.json";
    pub const PER_CONCEPT: &str = "per_concept.csv";
    pub const AUC: &str = "auc.txt";
    pub const LABELS_DIR: &str = "labels";
    pub const REPORT: &str = "report.txt";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub from: Stage,
    pub until: Stage,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { from: Stage::Lexicon, until: Stage::Eval }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn read_artifact(dir: &Path, name: &str, stage: Stage) -> Result<String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingArtifact { stage, path });
    }
    fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
}

fn corrupt(dir: &Path, name: &str, message: impl fmt::Display) -> Error {
    Error::Artifact { path: dir.join(name), message: message.to_string() }
}

fn staged<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(stage))
}

/// Leaves of the configured groups plus the descendant closure of the
/// configured roots; everything when both are empty.
pub fn select_concepts(lexicon: &Lexicon, selection: &Selection) -> Result<BTreeSet<ConceptId>> {
    if selection.leaf_groups.is_empty() && selection.expand_roots.is_empty() {
        return Ok(lexicon.ids().cloned().collect());
    }
    let leaves = extract_leaf_concepts(lexicon);
    let mut selected: BTreeSet<ConceptId> = leaves
        .into_iter()
        .filter(|id| selection.leaf_groups.iter().any(|g| lexicon.get(id).is_some_and(|c| &c.group == g)))
        .collect();
    let roots: BTreeSet<ConceptId> = selection
        .expand_roots
        .iter()
        .map(|r| ConceptId::parse(r).ok_or_else(|| Error::Config("empty root id".into())))
        .collect::<Result<_>>()?;
    selected.extend(expand_descendants(lexicon, &roots)?);
    Ok(selected)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LexiconSummary {
    pub concepts: usize,
    pub terms: usize,
    pub leaves: usize,
    pub leaf_selected: usize,
    pub descendant_selected: usize,
    pub selected: usize,
    pub patterns: usize,
}

impl fmt::Display for LexiconSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "concepts:            {}", self.concepts)?;
        writeln!(f, "indexed terms:       {}", self.terms)?;
        writeln!(f, "leaf concepts:       {}", self.leaves)?;
        writeln!(f, "selected leaves:     {}", self.leaf_selected)?;
        writeln!(f, "selected by descent: {}", self.descendant_selected)?;
        writeln!(f, "selected concepts:   {}", self.selected)?;
        write!(f, "vocabulary patterns: {}", self.patterns)
    }
}

fn summarize(lexicon: &Lexicon, selection: &Selection, selected: &BTreeSet<ConceptId>) -> Result<LexiconSummary> {
    let leaves = extract_leaf_concepts(lexicon);
    let leaf_selected =
        leaves.iter().filter(|id| selection.leaf_groups.iter().any(|g| lexicon.get(id).is_some_and(|c| &c.group == g))).count();
    let roots: BTreeSet<ConceptId> = selection.expand_roots.iter().filter_map(|r| ConceptId::parse(r)).collect();
    let descendant_selected = expand_descendants(lexicon, &roots)?.len();
    let patterns = build_vocabulary(lexicon, selected)?.pattern_count();
    Ok(LexiconSummary {
        concepts: lexicon.len(),
        terms: lexicon.term_index().len(),
        leaves: leaves.len(),
        leaf_selected,
        descendant_selected,
        selected: selected.len(),
        patterns,
    })
}

fn write_selected(lexicon: &Lexicon, selected: &BTreeSet<ConceptId>) -> String {
    let mut out = String::from("concept_id\tgroup\tpreferred_name\n");
    for id in selected {
        let c = lexicon.get(id).expect("selected from lexicon");
        writeln!(out, "{}\t{}\t{}", c.id, c.group, c.preferred_name).expect("write to string");
    }
    out
}

fn parse_selected(text: &str) -> BTreeSet<ConceptId> {
    text.lines().skip(1).filter_map(|l| l.split('\t').next()).filter_map(ConceptId::parse).collect()
}

/// Loads the lexicon, resolves the concept selection and writes it out.
pub fn cmd_lexicon(cfg: &PipelineConfig) -> Result<LexiconSummary> {
    cfg.validate(&[&cfg.paths.lexicon])?;
    staged(Stage::Lexicon, || {
        let lexicon = load_lexicon(&cfg.paths.lexicon)?;
        let selected = select_concepts(&lexicon, &cfg.lexicon)?;
        let summary = summarize(&lexicon, &cfg.lexicon, &selected)?;
        fs::create_dir_all(&cfg.paths.output_dir)
            .map_err(|source| Error::Io { path: cfg.paths.output_dir.clone(), source })?;
        write_file(&cfg.paths.output_dir.join(artifacts::CONCEPTS), &write_selected(&lexicon, &selected))?;
        Ok(summary)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucSummary {
    pub raw: f64,
    pub encoded: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub gold_true: usize,
    pub baseline_counts: ConfusionCounts,
    pub baseline: Metrics,
    pub auc: AucSummary,
    pub per_concept: Vec<ConceptMetrics>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub stages_run: Vec<Stage>,
    pub n_docs: Option<usize>,
    pub n_mentions: Option<usize>,
    pub m_concepts: Option<usize>,
    pub encoded_dim: Option<usize>,
    pub final_loss: Option<f64>,
    pub eval: Option<EvalSummary>,
    pub pr_raw: Vec<PrPoint>,
    pub pr_encoded: Vec<PrPoint>,
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Runs `opts.from ..= opts.until`, reading earlier stages from the output
/// directory.
pub fn cmd_run(cfg: &PipelineConfig, opts: RunOptions) -> Result<RunSummary> {
    if opts.from > opts.until {
        return Err(Error::Config(format!("--from {} comes after --until {}", opts.from, opts.until)));
    }
    let mut inputs: Vec<&Path> = vec![&cfg.paths.lexicon];
    if opts.until >= Stage::Ner {
        inputs.push(&cfg.paths.corpus);
    }
    if opts.until >= Stage::Eval {
        inputs.push(&cfg.paths.gold);
    }
    cfg.validate(&inputs)?;
    fs::create_dir_all(&cfg.paths.output_dir).map_err(|source| Error::Io { path: cfg.paths.output_dir.clone(), source })?;
    thread_pool(cfg.threads)?.install(|| Runner { cfg, opts, out: &cfg.paths.output_dir }.run())
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    opts: RunOptions,
    out: &'a Path,
}

impl Runner<'_> {
    fn fresh(&self, stage: Stage) -> bool {
        stage >= self.opts.from
    }

    fn run(&self) -> Result<RunSummary> {
        let mut summary = RunSummary::default();
        let ran = |s: Stage, summary: &mut RunSummary| {
            if self.fresh(s) {
                summary.stages_run.push(s);
            }
        };

        let lexicon = staged(Stage::Lexicon, || Ok(load_lexicon(&self.cfg.paths.lexicon)?))?;
        let selected = staged(Stage::Lexicon, || self.selection(&lexicon))?;
        ran(Stage::Lexicon, &mut summary);
        if self.opts.until == Stage::Lexicon {
            return Ok(summary);
        }

        let corpus = staged(Stage::Ner, || Ok(load_corpus(&self.cfg.paths.corpus)?))?;
        summary.n_docs = Some(corpus.len());
        let mentions = staged(Stage::Ner, || self.mentions(&lexicon, &selected, &corpus))?;
        summary.n_mentions = Some(mentions.len());
        ran(Stage::Ner, &mut summary);
        if self.opts.until == Stage::Ner {
            return Ok(summary);
        }

        let (x, cooc) = staged(Stage::Matrix, || self.matrices(&corpus, &mentions, &lexicon))?;
        summary.m_concepts = Some(x.m_concepts());
        ran(Stage::Matrix, &mut summary);
        if self.opts.until == Stage::Matrix {
            return Ok(summary);
        }

        let model = staged(Stage::Autoencoder, || self.autoencoder(&cooc, &mut summary))?;
        summary.encoded_dim = Some(model.encoded_dim());
        ran(Stage::Autoencoder, &mut summary);
        if self.opts.until == Stage::Autoencoder {
            return Ok(summary);
        }

        let (raw, encoded) = staged(Stage::Score, || self.scores(&mentions, &x, &cooc, &model))?;
        ran(Stage::Score, &mut summary);
        if self.opts.until == Stage::Score {
            return Ok(summary);
        }

        staged(Stage::Eval, || self.evaluate(&lexicon, &corpus, &raw, &encoded, &mut summary))?;
        ran(Stage::Eval, &mut summary);
        Ok(summary)
    }

    fn selection(&self, lexicon: &Lexicon) -> Result<BTreeSet<ConceptId>> {
        if !self.fresh(Stage::Lexicon) {
            let selected = parse_selected(&read_artifact(self.out, artifacts::CONCEPTS, Stage::Lexicon)?);
            if let Some(bad) = selected.iter().find(|id| !lexicon.contains(id)) {
                return Err(corrupt(self.out, artifacts::CONCEPTS, format!("unknown concept {bad}")));
            }
            return Ok(selected);
        }
        let selected = select_concepts(lexicon, &self.cfg.lexicon)?;
        write_file(&self.out.join(artifacts::CONCEPTS), &write_selected(lexicon, &selected))?;
        Ok(selected)
    }

    fn mentions(&self, lexicon: &Lexicon, selected: &BTreeSet<ConceptId>, corpus: &Corpus) -> Result<Vec<Mention>> {
        if !self.fresh(Stage::Ner) {
            let text = read_artifact(self.out, artifacts::MENTIONS, Stage::Ner)?;
            return parse_mentions_jsonl(&text)
                .map_err(|(line, e)| corrupt(self.out, artifacts::MENTIONS, format!("line {line}: {e}")));
        }
        let vocab = build_vocabulary(lexicon, selected)?;
        let rules = &self.cfg.ner;
        let per_doc: Vec<Vec<Mention>> = corpus
            .docs()
            .par_iter()
            .map(|doc| apply_filter_rules(&find_mentions(doc, &vocab), doc, rules))
            .collect();
        let mentions: Vec<Mention> = per_doc.into_iter().flatten().collect();
        write_file(&self.out.join(artifacts::MENTIONS), &write_mentions_jsonl(&mentions))?;
        Ok(mentions)
    }

    fn matrices(
        &self,
        corpus: &Corpus,
        mentions: &[Mention],
        lexicon: &Lexicon,
    ) -> Result<(DocConceptMatrix, CoocMatrix)> {
        if !self.fresh(Stage::Matrix) {
            return self.load_matrices();
        }
        let x = build_doc_concept_matrix(corpus, mentions, lexicon)?;
        let cooc = build_cooc_matrix(&x);
        let ids: Vec<&str> = x.concept_ids().iter().map(ConceptId::as_str).collect();
        write_file(&self.out.join(artifacts::DOC_ORDER), &write_id_list(x.doc_ids()))?;
        write_file(&self.out.join(artifacts::CONCEPT_ORDER), &write_id_list(&ids))?;
        write_file(&self.out.join(artifacts::DOC_CONCEPT), &write_sparse(x.n_docs(), x.m_concepts(), x.triplets()))?;
        write_file(&self.out.join(artifacts::COOC), &write_sparse(cooc.m_concepts(), cooc.m_concepts(), cooc.triplets()))?;
        Ok((x, cooc))
    }

    fn load_matrices(&self) -> Result<(DocConceptMatrix, CoocMatrix)> {
        let read = |name| read_artifact(self.out, name, Stage::Matrix);
        let docs = parse_id_list(&read(artifacts::DOC_ORDER)?);
        let concepts: Vec<ConceptId> = parse_id_list(&read(artifacts::CONCEPT_ORDER)?)
            .iter()
            .filter_map(|s| ConceptId::parse(s))
            .collect();
        let (rows, cols, triplets) =
            parse_sparse(&read(artifacts::DOC_CONCEPT)?).map_err(|e| corrupt(self.out, artifacts::DOC_CONCEPT, e))?;
        if rows != docs.len() || cols != concepts.len() {
            return Err(corrupt(self.out, artifacts::DOC_CONCEPT, "shape disagrees with order files"));
        }
        let x = DocConceptMatrix::from_parts(docs, concepts.clone(), triplets)?;
        let (rows, cols, triplets) =
            parse_sparse(&read(artifacts::COOC)?).map_err(|e| corrupt(self.out, artifacts::COOC, e))?;
        if rows != concepts.len() || cols != concepts.len() {
            return Err(corrupt(self.out, artifacts::COOC, "shape disagrees with concept order"));
        }
        let cooc = CoocMatrix::from_parts(concepts, triplets)?;
        Ok((x, cooc))
    }

    fn autoencoder(&self, cooc: &CoocMatrix, summary: &mut RunSummary) -> Result<AeModel<f64>> {
        if !self.fresh(Stage::Autoencoder) {
            let text = read_artifact(self.out, artifacts::MODEL, Stage::Autoencoder)?;
            let (model, _) = model_from_json::<f64>(&text)?;
            if model.input_dim() != cooc.m_concepts() {
                return Err(corrupt(self.out, artifacts::MODEL, "input dimension disagrees with the matrices"));
            }
            return Ok(model);
        }
        let m = cooc.m_concepts();
        if m < 2 {
            return Err(Error::Config(format!("only {m} concept(s) observed; the autoencoder needs at least 2")));
        }
        let config = self.cfg.autoencoder.resolve(m, self.cfg.seed);
        let data = concept_embeddings::<f64>(cooc, self.cfg.matrix.normalized);
        let model = init_model::<f64>(&config)?;
        let (model, report) = train(model, &data, &config)?;
        summary.final_loss = Some(report.final_loss);
        write_file(&self.out.join(artifacts::MODEL), &model_to_json(&model, config.seed))?;
        write_file(&self.out.join(artifacts::TRAIN_REPORT), &train_report_json(&report))?;
        Ok(model)
    }

    fn scores(
        &self,
        mentions: &[Mention],
        x: &DocConceptMatrix,
        cooc: &CoocMatrix,
        model: &AeModel<f64>,
    ) -> Result<(Vec<ScoredMention>, Vec<ScoredMention>)> {
        if !self.fresh(Stage::Score) {
            let read = |name| -> Result<Vec<ScoredMention>> {
                let text = read_artifact(self.out, name, Stage::Score)?;
                parse_scored_jsonl(&text).map_err(|(line, e)| corrupt(self.out, name, format!("line {line}: {e}")))
            };
            return Ok((read(artifacts::SCORED_RAW)?, read(artifacts::SCORED_ENCODED)?));
        }
        let normalized = self.cfg.matrix.normalized;
        let raw_table = EmbeddingTable::from_columns(x, concept_embeddings::<f64>(cooc, normalized))?;
        let encoded = encode_all(model, cooc, normalized)?;
        let mut tsv = String::new();
        for (id, v) in x.concept_ids().iter().zip(&encoded) {
            let vals: Vec<String> = v.values().iter().map(f64::to_string).collect();
            writeln!(tsv, "{id}\t{}", vals.join("\t")).expect("write to string");
        }
        let enc_table = EmbeddingTable::from_columns(x, encoded)?;
        let raw = score_parallel(mentions, x, &raw_table)?;
        let enc = score_parallel(mentions, x, &enc_table)?;
        write_file(&self.out.join(artifacts::ENCODED_EMBEDDINGS), &tsv)?;
        write_file(&self.out.join(artifacts::SCORED_RAW), &write_scored_jsonl(&raw))?;
        write_file(&self.out.join(artifacts::SCORED_ENCODED), &write_scored_jsonl(&enc))?;
        Ok((raw, enc))
    }

    fn evaluate(
        &self,
        lexicon: &Lexicon,
        corpus: &Corpus,
        raw: &[ScoredMention],
        encoded: &[ScoredMention],
        summary: &mut RunSummary,
    ) -> Result<()> {
        let gold = load_gold(&self.cfg.paths.gold, corpus)?;
        let sweep = self.cfg.sweep.build()?;
        let eval = evaluate(raw, encoded, &gold, &sweep, &mut summary.pr_raw, &mut summary.pr_encoded)?;

        write_file(&self.out.join(artifacts::PR_RAW), &write_pr_csv(&summary.pr_raw))?;
        write_file(&self.out.join(artifacts::PR_ENCODED), &write_pr_csv(&summary.pr_encoded))?;
        let mut metrics = serde_json::to_string_pretty(&eval).expect("metrics serialize");
        metrics.push('\n');
        write_file(&self.out.join(artifacts::METRICS), &metrics)?;
        write_file(&self.out.join(artifacts::PER_CONCEPT), &per_concept_csv(&eval.per_concept, lexicon))?;
        write_file(
            &self.out.join(artifacts::AUC),
            &format!("pr_auc raw={} encoded={} gap={}\n", eval.auc.raw, eval.auc.encoded, eval.auc.gap),
        )?;
        let labels = self.out.join(artifacts::LABELS_DIR);
        fs::create_dir_all(&labels).map_err(|source| Error::Io { path: labels.clone(), source })?;
        for &tau in sweep.thresholds() {
            write_file(&labels.join(format!("raw_{tau:.2}.csv")), &write_labels_csv(raw, tau))?;
            write_file(&labels.join(format!("encoded_{tau:.2}.csv")), &write_labels_csv(encoded, tau))?;
        }
        summary.eval = Some(eval);
        Ok(())
    }
}

fn score_parallel(mentions: &[Mention], x: &DocConceptMatrix, table: &EmbeddingTable<f64>) -> Result<Vec<ScoredMention>> {
    let chunks: Vec<Vec<ScoredMention>> = mentions
        .par_chunks(512)
        .map(|chunk| score_mentions(chunk, x, table))
        .collect::<std::result::Result<_, _>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn train_report_json(report: &TrainReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Baseline metrics (every unfiltered mention positive), per-concept metrics
/// of the baseline, and the PR sweep plus PR-AUC in both embedding spaces.
pub fn evaluate(
    raw: &[ScoredMention],
    encoded: &[ScoredMention],
    gold: &GoldSet,
    sweep: &crate::selflabel::ThresholdSweep,
    pr_raw: &mut Vec<PrPoint>,
    pr_encoded: &mut Vec<PrPoint>,
) -> Result<EvalSummary> {
    let mut warnings = Vec::new();
    if gold.is_empty() {
        warnings.push("gold file has no annotations; all metrics are zero".to_string());
    }
    let baseline_pred = label_at_threshold(raw, f64::NEG_INFINITY);
    let baseline_counts = match_to_gold(&baseline_pred, gold);
    let mut per_concept: Vec<ConceptMetrics> = per_concept_metrics(&baseline_pred, gold).into_values().collect();
    per_concept.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.concept.cmp(&b.concept)));

    *pr_raw = pr_sweep(raw, gold, sweep);
    *pr_encoded = pr_sweep(encoded, gold, sweep);
    let auc_of = |points: &[PrPoint]| if points.len() < 2 { Ok(0.0) } else { pr_auc(points) };
    let (a_raw, a_enc) = (auc_of(pr_raw)?, auc_of(pr_encoded)?);
    Ok(EvalSummary {
        gold_true: gold.true_count(),
        baseline_counts,
        baseline: compute_metrics(baseline_counts),
        auc: AucSummary { raw: a_raw, encoded: a_enc, gap: (a_raw - a_enc).abs() },
        per_concept,
        warnings,
    })
}

fn per_concept_csv(rows: &[ConceptMetrics], lexicon: &Lexicon) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["concept_id", "name", "support", "tp", "fp", "fn", "precision", "recall", "f1"])
        .expect("csv header");
    for r in rows {
        let name = ConceptId::parse(&r.concept)
            .and_then(|id| lexicon.get(&id).map(|c| c.preferred_name.clone()))
            .unwrap_or_default();
        w.write_record([
            r.concept.clone(),
            name,
            r.support.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.fn_.to_string(),
            r.metrics.precision.to_string(),
            r.metrics.recall.to_string(),
            r.metrics.f1.to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub struct Report {
    pub summary: EvalSummary,
    pub text: String,
    pub path: PathBuf,
}

/// Re-runs evaluation from cached score artifacts and renders a text report.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<Report> {
    let summary = cmd_run(cfg, RunOptions { from: Stage::Eval, until: Stage::Eval })?;
    let eval = summary.eval.clone().expect("eval stage ran");
    let lexicon = load_lexicon(&cfg.paths.lexicon)?;
    let text = render_report(&eval, &summary.pr_raw, &summary.pr_encoded, &lexicon);
    let path = cfg.paths.output_dir.join(artifacts::REPORT);
    write_file(&path, &text)?;
    Ok(Report { summary: eval, text, path })
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

pub fn render_report(eval: &EvalSummary, pr_raw: &[PrPoint], pr_encoded: &[PrPoint], lexicon: &Lexicon) -> String {
    let mut out = String::new();
    let w = &mut out;
    for warning in &eval.warnings {
        writeln!(w, "warning: {warning}").unwrap();
    }
    let c = eval.baseline_counts;
    writeln!(w, "== Dictionary NER baseline ({} gold mentions) ==", eval.gold_true).unwrap();
    writeln!(w, "tp={} fp={} fn={}", c.tp, c.fp, c.fn_).unwrap();
    writeln!(
        w,
        "precision {}  recall {}  F1 {}",
        pct(eval.baseline.precision),
        pct(eval.baseline.recall),
        pct(eval.baseline.f1)
    )
    .unwrap();

    writeln!(w, "\n== Per-concept performance (top 5 by support) ==").unwrap();
    writeln!(w, "{:<36} {:>7} {:>9} {:>7} {:>6}", "concept", "support", "precision", "recall", "F1").unwrap();
    let map = eval.per_concept.iter().map(|r| (r.concept.clone(), r.clone())).collect();
    let (head, others) = top_concepts_with_others(&map, 5);
    for r in head.iter().chain(others.as_ref()) {
        let label = ConceptId::parse(&r.concept)
            .and_then(|id| lexicon.get(&id).map(|c| format!("{} ({})", c.preferred_name, c.id)))
            .unwrap_or_else(|| r.concept.clone());
        writeln!(
            w,
            "{:<36} {:>7} {:>9} {:>7} {:>6}",
            label,
            r.support,
            pct(r.metrics.precision),
            pct(r.metrics.recall),
            pct(r.metrics.f1)
        )
        .unwrap();
    }

    writeln!(w, "\n== Self-labeling threshold sweep ==").unwrap();
    writeln!(w, "{:>9}  {:>9} {:>7}  {:>9} {:>7}", "threshold", "P(raw)", "R(raw)", "P(enc)", "R(enc)").unwrap();
    for (a, b) in pr_raw.iter().zip(pr_encoded) {
        writeln!(
            w,
            "{:>9.2}  {:>9} {:>7}  {:>9} {:>7}",
            a.threshold,
            pct(a.precision),
            pct(a.recall),
            pct(b.precision),
            pct(b.recall)
        )
        .unwrap();
    }
    writeln!(w, "\n== PR-AUC ==").unwrap();
    writeln!(w, "without autoencoder: {:.4}", eval.auc.raw).unwrap();
    writeln!(w, "with autoencoder:    {:.4}", eval.auc.encoded).unwrap();
    writeln!(w, "gap:                 {:.4}", eval.auc.gap).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("bogus".parse::<Stage>().is_err());
        assert!(Stage::Lexicon < Stage::Eval);
    }

    #[test]
    fn selection_rules() {
        let lex = crate::lexicon::parse_lexicon(
            "concept_id,term,is_preferred,parent_ids,group\n\
             R,root,true,,ACE\nL1,leaf one,true,R,ACE\nL2,leaf two,true,R,ACE\n\
             M,mental,true,,md\nM1,mental child,true,M,md\nX,other,true,,ev\n",
        )
        .unwrap();
        let sel = Selection { leaf_groups: vec!["ACE".into()], expand_roots: vec!["M".into()] };
        let got: Vec<String> = select_concepts(&lex, &sel).unwrap().iter().map(|c| c.to_string()).collect();
        assert_eq!(got, ["L1", "L2", "M", "M1"]);
        assert_eq!(select_concepts(&lex, &Selection::default()).unwrap().len(), 6);
        let bad = Selection { leaf_groups: vec![], expand_roots: vec!["nope".into()] };
        assert!(select_concepts(&lex, &bad).is_err());
    }
}
