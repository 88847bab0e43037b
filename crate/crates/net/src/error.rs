use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("adaptive step underflow at t={t}: h={h:e}")]
    Stiff { t: f64, h: f64 },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Topo(#[from] overlap_topo::TopoError),
    #[error(transparent)]
    Autodiff(#[from] overlap_autodiff::AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
