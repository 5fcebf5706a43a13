use thiserror::Error;

/// Errors raised by the simulator. The variant doubles as the error category
/// reported by the command-line tool.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("read-safety violation: encoded voltage {voltage} V outside ({lower} V, {upper} V)")]
    ReadSafety { voltage: f64, lower: f64, upper: f64 },

    #[error("time {time} s outside waveform span [{start}, {end})")]
    OutOfSpan { time: f64, start: f64, end: f64 },

    #[error("timing: {0}")]
    Timing(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index ({row}, {col}) out of range for {rows}x{cols} crossbar")]
    Index { row: usize, col: usize, rows: usize, cols: usize },

    #[error("characterization failed: {0}")]
    Characterization(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),

    #[error("run {run}: {source}")]
    Run { run: String, source: Box<Error> },
}

impl Error {
    /// Short category name, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::NonFinite(_) => "parameter",
            Error::ReadSafety { .. } => "read-safety",
            Error::OutOfSpan { .. } | Error::Timing(_) => "timing",
            Error::Dimension { .. } | Error::Index { .. } => "shape",
            Error::Characterization(_) => "characterization",
            Error::Unknown { .. } => "unknown",
            Error::Dataset(_) => "dataset",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Run { source, .. } => source.category(),
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "parameter" => 2,
            "read-safety" => 3,
            "timing" => 4,
            "shape" => 5,
            "characterization" => 6,
            "unknown" => 7,
            "dataset" => 8,
            "config" => 9,
            "io" => 10,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
