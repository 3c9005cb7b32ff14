use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {column} {message}")]
    MalformedRow {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("no observations")]
    NoObservations,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("empty arm")]
    EmptyArm,
    #[error("unidentified: zero denominator")]
    ZeroDenominator,
    #[error("non-identified: {0}")]
    NonIdentified(String),
    #[error("sampler stuck: {0}")]
    SamplerStuck(String),
    #[error("no finite-density initial point after {0} attempts")]
    NoInitialPoint(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite draws in `{0}`")]
    NonFiniteDraws(String),
    #[error("DGP probability overflow: {clipped} of {total} records clipped")]
    ProbabilityOverflow { clipped: usize, total: usize },
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input or configuration problems, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::MissingColumn(_)
                | Error::NoObservations
                | Error::InvalidWindow(_)
                | Error::Config(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
