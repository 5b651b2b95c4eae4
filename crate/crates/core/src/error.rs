use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {shapes:?}")]
    Dimension { op: &'static str, shapes: Vec<Vec<usize>> },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("every class of the distribution is masked out")]
    InfeasibleDistribution,

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("constraints are infeasible: no admissible node for vertex {vertex}")]
    InfeasibleConstraints { vertex: usize },

    #[error("selection reached a fully masked row at vertex {vertex} (parent node {node})")]
    InfeasibleSelection { vertex: usize, node: usize },

    #[error("enumeration too large: {0}")]
    Size(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("ingestion error at line {line}: {message}")]
    Ingestion { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("linear algebra: {0}")]
    LinAlg(String),
}
