use std::path::PathBuf;

use thiserror::Error;

use crate::autoencoder::AeError;
use crate::eval::EvalError;
use crate::ingest::IngestError;
use crate::lexicon::LexiconError;
use crate::matrix::MatrixError;
use crate::pipeline::Stage;
use crate::selflabel::SelfLabelError;
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Autoencoder(#[from] AeError),
    #[error(transparent)]
    SelfLabel(#[from] SelfLabelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing {stage} artifact {}; run that stage first", path.display())]
    MissingArtifact { stage: Stage, path: PathBuf },
    #[error("corrupt artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// 2 for usage/config problems, 1 for pipeline failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ (Error::Stage { .. } | Error::Config(_)) => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}
