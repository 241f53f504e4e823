use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate cut in cell {cell}: all vertex values vanish")]
    DegenerateCut { cell: usize },

    #[error("singular matrix (pivot {pivot:?})")]
    SingularMatrix { pivot: Option<usize> },

    #[error("matrix of dimension {dim} exceeds the dense limit {limit}")]
    UnsupportedSize { dim: usize, limit: usize },

    #[error("linear algebra backend failure: {0}")]
    Backend(String),

    #[error("step {step}, {stage} stage: {source}")]
    Stage {
        step: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
