use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("model fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

pub(crate) fn need(n: usize, got: usize) -> Result<()> {
    if got < n {
        Err(StatsError::TooFew { need: n, got })
    } else {
        Ok(())
    }
}

pub(crate) fn finite(sample: &[f64]) -> Result<()> {
    if sample.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::Parameter("non-finite observation".into()))
    }
}
