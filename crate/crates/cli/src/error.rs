use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{source_name}:{line}: {message}")]
    ConfigSyntax {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("unknown config key `{key}` (from {origin}); valid keys: {valid}")]
    UnknownKey {
        key: String,
        origin: String,
        valid: String,
    },
    #[error("config key `{key}` set twice in {source_name}")]
    DuplicateKey { key: String, source_name: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown experiment `{name}`; valid experiments: {valid}")]
    UnknownExperiment { name: String, valid: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    InputRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: no samples", path.display())]
    EmptyInput { path: PathBuf },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] pdob_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
