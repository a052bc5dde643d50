use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const INCONCLUSIVE: i32 = 4;
    pub const FAILED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical precondition failed: {0}")]
    Numerical(rcm_oze::Error),

    #[error(transparent)]
    Library(rcm_oze::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Library(rcm_oze::Error::Io(_)) | CliError::Io { .. } => exit::IO,
            CliError::Library(rcm_oze::Error::Parse(_)) => exit::IO,
            CliError::Library(_) => exit::CONFIG,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<rcm_oze::Error> for CliError {
    fn from(e: rcm_oze::Error) -> Self {
        if e.is_numerical_precondition() {
            CliError::Numerical(e)
        } else {
            CliError::Library(e)
        }
    }
}
