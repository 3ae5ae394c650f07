use thiserror::Error;

use crate::lattice::NodeRef;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate cell vectors (|det| = {0:e})")]
    DegenerateCell(f64),
    #[error("duplicate node modulo lattice: basic nodes {0} and {1}")]
    DuplicateNode(usize, usize),
    #[error("ghost rule not a convex combination: {0}")]
    InvalidGhost(String),
    #[error("triangulation gap/overlap: {0}")]
    Triangulation(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("basic node index {index} out of range (lattice has {len})")]
    NodeOutOfRange { index: usize, len: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("missing value at node {0}")]
    MissingValue(NodeRef),
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
    #[error("gradient requires a smoothed penalty (tau > 0)")]
    UnsmoothedPenalty,
    #[error("zero-length deformed arm in torsional angle term")]
    ZeroArm,
    #[error("non-finite objective: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lattice `{0}` has no registered polygon decomposition")]
    NoDecomposition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
