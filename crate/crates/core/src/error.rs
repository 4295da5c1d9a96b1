use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chromosome: {0}")]
    InvalidChromosome(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training split contains a single class ({0}); at least two are required")]
    DegenerateLabels(usize),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("search space holds {size} solutions, above the enumeration cap of {cap}")]
    EnumerationCap { size: String, cap: u64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
