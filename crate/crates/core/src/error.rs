use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid extent: {0}")]
    InvalidExtent(String),
    #[error("grid needs {cells} cells, budget is {budget}")]
    CellBudgetExceeded { cells: u64, budget: u64 },
    #[error("exponent p = {p} outside {expected}")]
    InvalidExponent { p: f64, expected: &'static str },
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("unsupported dimension {0}")]
    UnsupportedDim(usize),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("{0}")]
    NotCompactlySupported(String),
    #[error("bump support leaves the domain at cell {0:?}")]
    SupportOutsideDomain([i64; 2]),
    #[error("degenerate rigid motion: {0}")]
    DegenerateMotion(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("pair {0} is not disjoint")]
    NotDisjoint(usize),
    #[error("probe image vanishes identically; operator is not of composition type on this grid")]
    ZeroProbeImage,
    #[error("component {component} has {nodes} usable nodes, need at least {needed}")]
    ComponentTooSmall {
        component: usize,
        nodes: usize,
        needed: usize,
    },
    #[error("cannot invert operator: {0}")]
    NotInvertible(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
