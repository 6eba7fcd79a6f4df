use std::io;
use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const NO_RESULT: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const TRUNCATED: u8 = 3;
    pub const NUMERICAL: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    MissingFile { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {msg}", path.display())]
    MalformedMatrix { path: PathBuf, line: usize, msg: String },

    #[error("{}:{line}: {msg}", path.display())]
    Manifest { path: PathBuf, line: usize, msg: String },

    #[error("{}:{line}: {msg}", path.display())]
    Dimension { path: PathBuf, line: usize, msg: String },

    #[error("{}:{line}: unknown regime '{name}' (expected single, multi, delay_param or wams)", path.display())]
    UnknownRegime { path: PathBuf, line: usize, name: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] delaytrack::Error),
}

impl CliError {
    /// Short stable tag naming the error class.
    pub fn kind(&self) -> &'static str {
        use delaytrack::Error as E;
        match self {
            CliError::MissingFile { .. } => "missing-file",
            CliError::MalformedMatrix { .. } => "malformed-matrix",
            CliError::Manifest { .. } => "manifest",
            CliError::Dimension { .. } => "dimension",
            CliError::UnknownRegime { .. } => "unknown-regime",
            CliError::Usage(_) => "usage",
            CliError::Output { .. } => "output",
            CliError::Core(E::Config(_) | E::Range { .. }) => "config",
            CliError::Core(E::Dimension(_)) => "dimension",
            CliError::Core(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            "numerical" => exit::NUMERICAL,
            _ => exit::CONFIG,
        }
    }
}
