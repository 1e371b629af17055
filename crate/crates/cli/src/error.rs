use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Table { path: PathBuf, line: u64, message: String },
    #[error("{context}: {source}")]
    Expr { context: String, source: nlprofile::ExprError },
    #[error(transparent)]
    Model(#[from] nlprofile::ModelError),
    #[error(transparent)]
    Dataset(#[from] nlprofile::DatasetError),
    #[error(transparent)]
    Fit(#[from] nlprofile::FitError),
    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("profiling failed: {0}")]
    Profile(String),
}

impl CliError {
    /// 0 success, 1 input error, 2 non-convergence, 3 profile failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonConvergence(_) => 2,
            CliError::Profile(_) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }
}

impl From<nlprofile::ProfileError> for CliError {
    fn from(e: nlprofile::ProfileError) -> Self {
        CliError::Profile(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
