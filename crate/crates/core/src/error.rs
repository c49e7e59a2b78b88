use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("relation {relation}: edge ({src}, {dst}) out of range for {n_src} x {n_dst} nodes")]
    EdgeOutOfRange {
        relation: String,
        src: usize,
        dst: usize,
        n_src: usize,
        n_dst: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown node type `{0}`")]
    UnknownNodeType(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("node index {index} out of range for type `{node_type}` with {count} nodes")]
    NodeOutOfRange {
        node_type: String,
        index: usize,
        count: usize,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fold error: {0}")]
    Fold(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("batch error: {0}")]
    Batch(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("load error in {file} at {location}: {message}")]
    Load {
        file: String,
        location: String,
        message: String,
    },
    #[error("unknown report format `{0}`")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
