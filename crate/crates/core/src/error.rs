use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid landscape: {0}")]
    Landscape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("scale overflow: {0}")]
    ScaleOverflow(String),
    #[error("clock overflow after {steps} steps")]
    ClockOverflow { steps: u64 },
    #[error("precision budget exceeded: {0}")]
    Precision(String),
    #[error("dimension {got} exceeds dense oracle limit {limit}")]
    Dimension { got: u64, limit: u64 },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
