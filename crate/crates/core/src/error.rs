use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient distinct values for {attribute}: need {needed}, found {found}")]
    InsufficientDistinct {
        attribute: String,
        needed: usize,
        found: usize,
    },

    #[error("coordinate out of range: ({lat}, {lon})")]
    CoordinateOutOfRange { lat: f64, lon: f64 },

    #[error("input not sorted: {0}")]
    Unsorted(String),

    #[error("cycle detected among entities {0:?}")]
    Cycle(Vec<String>),

    #[error("tree rooted at {root} has {nodes} nodes, above the cap of {cap}")]
    TreeTooLarge { root: String, nodes: usize, cap: usize },

    #[error("no clusters found: {0}")]
    NoClusters(String),

    #[error("pattern {0} does not occur in any tree")]
    PatternNotFound(String),

    #[error("invalid pattern encoding: {0}")]
    InvalidPattern(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}
