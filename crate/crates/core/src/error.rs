use thiserror::Error;

/// Errors raised by graph construction, field models and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("graph is disconnected: vertex {vertex} is unreachable from vertex 0")]
    Disconnected { vertex: usize },
    #[error("edge `{edge}` has non-positive or non-finite length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("edge `{edge}` references vertex {vertex}, but the graph has {vertex_count} vertices")]
    DanglingEndpoint {
        edge: String,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("duplicate edge id `{0}`")]
    DuplicateEdgeId(String),
    #[error("unknown edge id `{0}`")]
    UnknownEdge(String),
    #[error("point ({edge}, {t}) lies outside its edge")]
    PointOffEdge { edge: usize, t: f64 },
    #[error("join references missing vertex {vertex} (part has {vertex_count} vertices)")]
    MissingJoinVertex { vertex: usize, vertex_count: usize },
    #[error("unsupported graph: {0}")]
    UnsupportedGraph(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate case: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exact construction requires alpha = 1 (got {0}); use the spectral operator")]
    RouteToSpectral(f64),
    #[error("no Whittle-Matern field exists for alpha = {0} <= 1/2")]
    NonExistence(f64),
    #[error("conditioning failed: {0}")]
    ConditioningFailure(String),
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64, tolerance: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by malformed input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::ConditioningFailure(_)
                | Error::NotPositiveSemiDefinite { .. }
                | Error::Singular(_)
                | Error::Eigen(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
