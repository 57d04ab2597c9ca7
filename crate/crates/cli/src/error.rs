use thiserror::Error;

use crate::dataset::DataError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    MissingDataset(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{source}")]
    Core {
        stage: &'static str,
        source: tsvd_core::Error,
    },
}

impl CliError {
    pub fn core(stage: &'static str) -> impl FnOnce(tsvd_core::Error) -> CliError {
        move |source| CliError::Core { stage, source }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core { source, .. } if source.is_convergence_failure() => 4,
            CliError::Core { source, .. } if source.is_input_error() => 2,
            CliError::Core { .. } => 3,
            _ => 2,
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            CliError::Core { stage, .. } => stage,
            CliError::Write { .. } => "output",
            _ => "input",
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Data(e) => match e {
                DataError::Io { .. } => "Io",
                DataError::Parse { .. } => "ParseError",
                DataError::RaggedRows { .. } => "RaggedRows",
                DataError::Empty => "EmptyInput",
                DataError::ZeroVarianceColumn(_) => "ZeroVarianceColumn",
                DataError::Csv(_) => "Csv",
            },
            CliError::Usage(_) => "Usage",
            CliError::MissingDataset(_) => "MissingDataset",
            CliError::Write { .. } => "Io",
            CliError::Core { source, .. } => source.kind(),
        }
    }

    /// The single machine-readable line printed on stderr.
    pub fn line(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!("error stage={} kind={} message={}", self.stage(), self.kind(), message)
    }
}
