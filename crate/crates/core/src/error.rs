use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("negative area {value:e} in layer {layer} at cell {cell} after stage {stage}")]
    NegativeArea { layer: usize, cell: usize, stage: usize, value: f64 },
    #[error("hyperbolicity lost in {count} cells at t = {time}")]
    HyperbolicityLoss { count: usize, time: f64 },
    #[error("mass of layer {layer} not conserved: interior change {change:e} vs boundary flux {flux:e}")]
    Conservation { layer: usize, change: f64, flux: f64 },
    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),
    #[error("invalid boundary data: {0}")]
    Boundary(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
