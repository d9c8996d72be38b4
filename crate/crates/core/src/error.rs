use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate net: {distinct} distinct pin(s), at least 2 required")]
    DegenerateNet { distinct: usize },

    #[error("duplicate point ({x}, {y})")]
    DuplicatePoint { x: i64, y: i64 },

    #[error("hanan grid has {nodes} nodes, cap is {cap}")]
    GridTooLarge { nodes: usize, cap: usize },

    #[error("exact solver budget exceeded: degree {degree} > {max_degree}")]
    BudgetExceeded { degree: usize, max_degree: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },

    #[error("net {net}: unknown node {node}")]
    UnknownNode { net: String, node: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short stable tag used by the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateNet { .. } => "degenerate_net",
            Error::DuplicatePoint { .. } => "duplicate_point",
            Error::GridTooLarge { .. } => "grid_too_large",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::ArchitectureMismatch(_) => "architecture_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Malformed { .. } => "malformed",
            Error::UnknownNode { .. } => "unknown_node",
            Error::Io { .. } => "io",
            Error::Invalid(_) => "invalid",
        }
    }
}
