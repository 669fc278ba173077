use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("bundle {path}: {message}")]
    Bundle { path: PathBuf, message: String },

    #[error("numerical failure: {0}")]
    Numerical(modbohm::Error),

    #[error("{failed} identity check(s) failed")]
    Identity { failed: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 1 identity failure, 2 config, bundle or i/o error,
    /// 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Identity { .. } => 1,
            CliError::Config { .. } | CliError::Bundle { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<modbohm::Error> for CliError {
    fn from(e: modbohm::Error) -> Self {
        CliError::Numerical(e)
    }
}
