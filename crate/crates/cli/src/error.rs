//! Pipeline and CLI error type with stable process exit codes.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    InvalidData(String),

    #[error("gene {gene}: {source}")]
    Gene {
        gene: String,
        #[source]
        source: maxnml_core::Error,
    },

    #[error(transparent)]
    Core(#[from] maxnml_core::Error),
}

impl PipelineError {
    /// Exit codes: 3 parse/input, 4 infeasible constraints, 5 cap exceeded,
    /// 6 internal (clap reserves 2 for usage errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } | PipelineError::Parse { .. } => 3,
            PipelineError::InvalidData(_) => 3,
            PipelineError::Gene { source, .. } | PipelineError::Core(source) => match source {
                maxnml_core::Error::InfeasibleMoments { .. } => 4,
                maxnml_core::Error::CapExceeded { .. } => 5,
                maxnml_core::Error::InvalidAlphabet(_)
                | maxnml_core::Error::InvalidSample(_)
                | maxnml_core::Error::InvalidInput(_)
                | maxnml_core::Error::DimensionMismatch(_) => 3,
                _ => 6,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
