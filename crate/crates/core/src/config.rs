//! Pipeline configuration (TOML).
//!
//! ```toml
//! seed = 7
//! threads = 1
//!
//! [paths]
//! lexicon = "data/lexicon.csv"
//! corpus = "data/corpus.jsonl"
//! gold = "data/gold.jsonl"
//! output_dir = "out"
//!
//! [lexicon]
//! leaf_groups = ["ACE"]
//! expand_roots = ["C9100000", "C9200000"]
//!
//! [ner]
//! negation_cues = ["no", "not", "never"]
//! negation_window = 3
//! stop_surfaces = []
//!
//! [matrix]
//! normalized = true
//!
//! [autoencoder]
//! # encoded_dim defaults to a quarter of the observed concept count
//! learning_rate = 0.01
//! epochs = 500
//! batch_size = 32
//! activation = "identity"
//!
//! [sweep]
//! start = 0.0
//! stop = 1.0
//! steps = 21
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::autoencoder::{AeConfig, Activation};
use crate::ner::FilterRules;
use crate::selflabel::ThresholdSweep;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    pub paths: Paths,
    #[serde(default)]
    pub lexicon: Selection,
    #[serde(default = "FilterRules::standard")]
    pub ner: FilterRules,
    #[serde(default)]
    pub matrix: MatrixOptions,
    #[serde(default)]
    pub autoencoder: AeOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
}

fn default_seed() -> u64 {
    7
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub lexicon: PathBuf,
    pub corpus: PathBuf,
    pub gold: PathBuf,
    pub output_dir: PathBuf,
}

/// Which lexicon concepts feed the vocabulary: leaves of `leaf_groups` plus
/// `expand_roots` with all their descendants. Both empty selects everything.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub leaf_groups: Vec<String>,
    pub expand_roots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixOptions {
    pub normalized: bool,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions { normalized: true }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeOptions {
    pub encoded_dim: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub activation: Activation,
}

impl Default for AeOptions {
    fn default() -> Self {
        AeOptions { encoded_dim: None, learning_rate: 0.01, epochs: 500, batch_size: 32, activation: Activation::Identity }
    }
}

impl AeOptions {
    /// Concrete config once the observed concept count `m` is known.
    pub fn resolve(&self, m: usize, seed: u64) -> AeConfig {
        AeConfig {
            input_dim: m,
            encoded_dim: self.encoded_dim.unwrap_or((m / 4).max(1)),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Explicit thresholds; overrides `start`/`stop`/`steps`.
    pub thresholds: Option<Vec<f64>>,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { thresholds: None, start: 0.0, stop: 1.0, steps: 21 }
    }
}

impl SweepOptions {
    pub fn build(&self) -> Result<ThresholdSweep> {
        let sweep = match &self.thresholds {
            Some(t) => ThresholdSweep::new(t.clone()),
            None => ThresholdSweep::linspace(self.start, self.stop, self.steps),
        };
        sweep.map_err(|e| Error::Config(e.to_string()))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut cfg.paths.lexicon, &mut cfg.paths.corpus, &mut cfg.paths.gold, &mut cfg.paths.output_dir] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// A config pointing at the given inputs with every other setting at its default.
    pub fn with_paths(lexicon: PathBuf, corpus: PathBuf, gold: PathBuf, output_dir: PathBuf) -> Self {
        PipelineConfig {
            seed: default_seed(),
            threads: default_threads(),
            paths: Paths { lexicon, corpus, gold, output_dir },
            lexicon: Selection::default(),
            ner: FilterRules::standard(),
            matrix: MatrixOptions::default(),
            autoencoder: AeOptions::default(),
            sweep: SweepOptions::default(),
        }
    }

    /// Checks that `inputs` exist and the remaining settings are usable.
    pub fn validate(&self, inputs: &[&Path]) -> Result<()> {
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file not found: {}", p.display())));
            }
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.paths.output_dir.exists() && !self.paths.output_dir.is_dir() {
            return Err(Error::Config(format!("output path {} is not a directory", self.paths.output_dir.display())));
        }
        self.sweep.build()?;
        let ae = &self.autoencoder;
        if ae.epochs == 0 || ae.batch_size == 0 || !(ae.learning_rate >= 0.0 && ae.learning_rate.is_finite()) {
            return Err(Error::Config("autoencoder needs epochs ≥ 1, batch_size ≥ 1, finite learning_rate ≥ 0".into()));
        }
        Ok(())
    }
}
