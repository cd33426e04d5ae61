use thiserror::Error;

use crate::mesh::EntityKey;

/// Errors raised while building or applying the multigrid hierarchy.
#[derive(Debug, Error)]
pub enum MgError {
    #[error("entity {0:?} does not belong to the mesh")]
    InvalidEntity(EntityKey),

    #[error("mesh levels are not nested: fine level {fine}, coarse level {coarse}")]
    NotNested { fine: usize, coarse: usize },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("matrix is not symmetric positive definite (pivot {index} = {pivot:e})")]
    NotSpd { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mesh consistency: {0}")]
    MeshConsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("level {requested} out of range (finest level is {finest})")]
    LevelOutOfRange { requested: usize, finest: usize },

    #[error("problem too large: {dofs} unknowns exceeds the limit of {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MgError>;
