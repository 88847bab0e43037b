use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopoError {
    #[error("point cloud is invalid: {0}")]
    InvalidCloud(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("diagram carries no critical-edge tags for feature {0}")]
    MissingCriticalEdge(usize),
    #[error("malformed diagram record: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, TopoError>;
