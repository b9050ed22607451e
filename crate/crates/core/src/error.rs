use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("asymmetric input at ({row}, {col}): {upper} vs {lower}")]
    AsymmetricInput {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
    #[error("dimension overflow: {0} x {1}")]
    Overflow(usize, usize),
    #[error("matrix is not positive definite (breakdown at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sparsity pattern does not match the symbolic analysis")]
    PatternMismatch,
    #[error("penalty needs at least {min} vertices, got {n}")]
    TooFewVertices { n: usize, min: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("value {0} lies outside the basis domain")]
    DomainError(f64),
    #[error("degenerate basis: {knots} knots with degree {degree}")]
    DegenerateBasis { knots: usize, degree: usize },
    #[error("basis is already centered")]
    AlreadyCentered,
    #[error("mesh input points are collinear")]
    CollinearInput,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("observation location ({0}, {1}) has no mesh vertex")]
    MissingMeshVertex(f64, f64),
    #[error("hierarchical model needs at least 2 sites, found {0}")]
    SiteCountError(usize),
    #[error("value out of range: {0}")]
    RangeError(String),
    #[error("hyperparameter vector has length {found}, model expects {expected}")]
    HyperDimensionMismatch { expected: usize, found: usize },
    #[error("constraint matrix is singular")]
    SingularConstraint,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("no rows left after filtering")]
    EmptyAfterFiltering,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown plot kind `{0}`")]
    UnknownPlotKind(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
