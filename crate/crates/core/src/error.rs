use thiserror::Error;

/// Errors produced by graph construction, the eigensolver, and the
/// perturbation analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),

    #[error("unknown vertex id `{0}`")]
    UnknownVertex(String),

    #[error("edge index has length {got}, expected the graph dimension {expected}")]
    IndexLength { expected: usize, got: usize },

    #[error("graph dimension must be at least 1")]
    ZeroDimension,

    #[error("graph must have at least one vertex")]
    NoVertices,

    #[error("quotient multigraph is disconnected")]
    Disconnected,

    #[error("unknown builtin graph `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),

    #[error("quasimomentum has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("edge ordinal {0} is out of range")]
    EdgeNotFound(usize),

    #[error("graphs have different vertex sets or potentials")]
    VertexSetMismatch,

    #[error("band index {j} out of range 1..={nu}")]
    BandIndex { j: usize, nu: usize },

    #[error("assumption {0} violated: {1}")]
    AssumptionViolated(&'static str, String),

    #[error("Hessian matrix is singular")]
    SingularHessian,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("graph file parse error: {0}")]
    Json(#[from] serde_json::Error),
}
