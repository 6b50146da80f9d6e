use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DgcError>;

#[derive(Debug, Error)]
pub enum DgcError {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: usize, dst: usize },

    #[error("edge ({src}, {dst}) has non-positive weight {weight}")]
    NonPositiveWeight { src: usize, dst: usize, weight: f64 },

    #[error("self-loop on node {0} in edge list")]
    SelfLoop(usize),

    #[error("node {0} is isolated; the sym Laplacian needs every degree >= 1")]
    IsolatedNodeWithSymVariant(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("step size {dt} > 1 is unstable for the sym Laplacian")]
    UnstableStepSize { dt: f64 },

    #[error("invalid diffusion config: {0}")]
    InvalidConfig(String),

    #[error("matrix of order {n} exceeds the dense oracle limit {limit}")]
    TooLargeForDenseOracle { n: usize, limit: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("inverse diffusion overflow risk: t * lambda_max = {0} > 40")]
    OverflowRisk(f64),

    #[error("mask selects no nodes")]
    EmptyMask,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("missing bundle file {0}")]
    MissingFile(PathBuf),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("node {0} appears in more than one split")]
    MaskOverlap(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
