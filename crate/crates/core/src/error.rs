use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid route: {0}")]
    InvalidRoute(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("{}validation error: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }

    /// Prefixes the message with `context`, keeping the error kind.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{context}: {m}")),
            Error::InvalidRoute(m) => Error::InvalidRoute(format!("{context}: {m}")),
            Error::DegenerateSample(m) => Error::DegenerateSample(format!("{context}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{context}: {m}")),
            Error::Config(m) => Error::Config(format!("{context}: {m}")),
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{context}: {message}"),
            },
            Error::Validation { line, message } => Error::Validation {
                line,
                message: format!("{context}: {message}"),
            },
            io @ Error::Io { .. } => io,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Io { .. } => 3,
            Error::InvalidRoute(_)
            | Error::DegenerateSample(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Config(_) => 4,
            Error::Numerical(_) => 5,
        }
    }
}
