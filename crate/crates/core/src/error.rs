use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex index {index} out of range for {n} vertices")]
    InvalidVertex { index: usize, n: usize },

    #[error("tetrahedron {0} repeats a vertex")]
    RepeatedVertex(usize),

    #[error("degenerate tetrahedron (coplanar vertices)")]
    DegenerateTet,

    #[error("degenerate point set: {0}")]
    DegenerateGeometry(String),

    #[error("zero-length edge ({0}, {1})")]
    ZeroLengthEdge(usize, usize),

    #[error("incompatible chunk placement: {0}")]
    IncompatiblePlacement(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("r-division precondition violated: {0}")]
    RDivision(String),

    #[error("no admissible direction after {0} attempts")]
    DirectionExhausted(usize),

    #[error("matrix is not positive semidefinite: pivot {pivot:e} at dof {dof}")]
    NotPsd { dof: usize, pivot: f64 },

    #[error("singular interior block at vertex {0}")]
    SingularInterior(usize),

    #[error("null spaces differ: {0}")]
    NullSpaceMismatch(String),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("pcg did not converge in {iterations} iterations (relative residual {residual:e})")]
    PcgMaxIters { iterations: usize, residual: f64 },

    #[error("pcg breakdown at iteration {0}")]
    PcgBreakdown(usize),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
