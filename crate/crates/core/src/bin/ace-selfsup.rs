use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ace_selfsup::config::PipelineConfig;
use ace_selfsup::eval::write_gold_jsonl;
use ace_selfsup::ingest::write_corpus;
use ace_selfsup::lexicon::load_lexicon;
use ace_selfsup::pipeline::{cmd_lexicon, cmd_report, cmd_run, RunOptions, Stage};
use ace_selfsup::synth::{generate, SynthParams};
use ace_selfsup::{Error, Result};

#[derive(Parser)]
#[command(name = "ace-selfsup", version, about = "Lexicon-driven concept NER with co-occurrence self-labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the lexicon, resolve the concept selection and print a summary.
    Lexicon(Common),
    /// Run the pipeline (optionally a stage range) and print both PR-AUCs.
    Run {
        #[command(flatten)]
        common: Common,
        /// First stage to recompute; earlier stages are read from the output directory.
        #[arg(long, default_value = "lexicon")]
        from: Stage,
        /// Last stage to run.
        #[arg(long, alias = "stage", default_value = "eval")]
        until: Stage,
    },
    /// Re-evaluate cached scores and print the report.
    Report(Common),
    /// Write a synthetic corpus and gold file for a lexicon.
    Synth {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        corpus_out: PathBuf,
        #[arg(long)]
        gold_out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 240)]
        docs: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        let paths = &mut cfg.paths;
        for (slot, value) in [
            (&mut paths.output_dir, &self.output_dir),
            (&mut paths.lexicon, &self.lexicon),
            (&mut paths.corpus, &self.corpus),
            (&mut paths.gold, &self.gold),
        ] {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        Ok(cfg)
    }
}

fn write(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.clone(), source })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lexicon(common) => {
            let cfg = common.load()?;
            println!("{}", cmd_lexicon(&cfg)?);
        }
        Command::Run { common, from, until } => {
            let cfg = common.load()?;
            let s = cmd_run(&cfg, RunOptions { from, until })?;
            let names: Vec<&str> = s.stages_run.iter().map(|st| st.name()).collect();
            println!("stages: {}", names.join(", "));
            if let (Some(n), Some(k)) = (s.n_docs, s.n_mentions) {
                println!("documents: {n}  mentions: {k}");
            }
            if let Some(m) = s.m_concepts {
                println!("observed concepts: {m}");
            }
            if let (Some(k), Some(loss)) = (s.encoded_dim, s.final_loss) {
                println!("autoencoder: k={k} final loss {loss:.6}");
            }
            if let Some(eval) = &s.eval {
                for w in &eval.warnings {
                    eprintln!("warning: {w}");
                }
                println!("PR-AUC without autoencoder: {:.4}", eval.auc.raw);
                println!("PR-AUC with autoencoder:    {:.4}", eval.auc.encoded);
                println!("gap:                        {:.4}", eval.auc.gap);
            }
        }
        Command::Report(common) => {
            let cfg = common.load()?;
            let report = cmd_report(&cfg)?;
            for w in &report.summary.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.text);
        }
        Command::Synth { lexicon, corpus_out, gold_out, seed, docs } => {
            let lex = load_lexicon(&lexicon)?;
            let synth = generate(&lex, &SynthParams { seed, n_docs: docs, ..SynthParams::default() })?;
            write(&corpus_out, &write_corpus(&synth.corpus))?;
            write(&gold_out, &write_gold_jsonl(&synth.gold))?;
            println!("wrote {} documents and {} gold spans", synth.corpus.len(), synth.gold.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
