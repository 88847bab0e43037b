use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sweep needs at least {need} successful alpha values, got {got}")]
    SweepInsufficient { need: usize, got: usize },
    #[error(transparent)]
    Net(#[from] overlap_net::NetError),
    #[error(transparent)]
    Synth(#[from] overlap_synth::SynthError),
    #[error(transparent)]
    Stats(#[from] overlap_stats::StatsError),
    #[error(transparent)]
    Topo(#[from] overlap_topo::TopoError),
    #[error(transparent)]
    Autodiff(#[from] overlap_autodiff::AutodiffError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
