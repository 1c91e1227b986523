use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design matrix is rank deficient ({rows} rows, {cols} columns)")]
    RankDeficient { rows: usize, cols: usize },

    #[error("slope undefined: all x values are identical")]
    UndefinedSlope,

    #[error("no RANSAC candidate reached {min_samples} inliers in {trials} trials")]
    NoConsensus { min_samples: usize, trials: usize },

    #[error("residual must be a non-negative finite value, got {0}")]
    InvalidResidual(f64),

    #[error("non-consecutive time index: expected {expected}, found {found}")]
    NonConsecutive { expected: u64, found: u64 },

    #[error("regressor fit failed on window t={start}..={end}: {source}")]
    FitFailed {
        start: u64,
        end: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("no valid indices left for MAPE ({skipped} skipped)")]
    NoValidIndices { skipped: usize },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("no valid rows in {0}")]
    NoValidRows(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("every objective evaluation failed in round {round}")]
    AllPointsFailed { round: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::EmptyInput(_)
                | Error::NonConsecutive { .. }
                | Error::UnknownColumn(_)
                | Error::NoValidRows(_)
                | Error::Malformed(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
