use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("design column {column} is linearly dependent on the preceding columns")]
    RankDeficient { column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("objective is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::NonFinite { .. } | Error::Singular(_)
        )
    }
}
