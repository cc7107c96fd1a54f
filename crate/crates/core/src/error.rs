use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Every particle was assigned zero likelihood by the last outcome.
    #[error("degenerate posterior: total particle weight is {total}")]
    DegeneratePosterior { total: f64 },

    /// The posterior width in `g` reached zero, so no further setting can be designed.
    #[error("posterior collapsed (std_g = 0)")]
    CollapsedPosterior,

    #[error("grid index {index} out of range for {size} settings")]
    GridIndexOutOfRange { index: usize, size: usize },

    #[error("grid fit failed: {0}")]
    FitFailure(String),

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Csv(e.to_string())
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
