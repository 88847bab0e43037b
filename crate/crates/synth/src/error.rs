use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Autodiff(#[from] overlap_autodiff::AutodiffError),
}

pub type Result<T> = std::result::Result<T, SynthError>;
