use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spin value {value} at index {index} (expected -1 or +1)")]
    InvalidSpin { index: usize, value: i64 },

    #[error("problem size {n} exceeds the exhaustive-search limit of {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error("linear system is singular")]
    Singular,

    #[error("adaptive schedule did not converge along the {dimension} axis within {cap} entries")]
    NonConvergence { dimension: &'static str, cap: usize },

    #[error("fixed-point accumulator overflow ({bits} bits)")]
    Overflow { bits: u32 },

    #[error("missing ground-state oracle for instance {0} (enable proxy mode to use best-found energies)")]
    MissingOracle(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
