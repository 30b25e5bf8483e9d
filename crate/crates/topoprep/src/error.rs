use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or index ranges that do not fit together.
    #[error("malformed data: {0}")]
    Structure(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("singular S column {column}: |S_1a| = {value:e}")]
    SingularColumn { column: usize, value: f64 },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("gap collapse: {0}")]
    GapCollapse(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
