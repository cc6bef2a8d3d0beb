use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {dim}: at most {max} supported")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain box: {0}")]
    InvalidDomain(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature order {0} out of range 1..=64")]
    QuadratureOrder(usize),

    #[error("tensor quadrature needs {nodes} nodes, guard is {limit}")]
    TooManyNodes { nodes: u128, limit: u128 },

    #[error("MLS neighbourhood of radius {radius} holds {neighbors} points, not unisolvent for {required} basis polynomials")]
    RadiusTooSmall {
        radius: f64,
        neighbors: usize,
        required: usize,
    },

    #[error("RBF system is ill-conditioned (condition estimate {estimate:.3e}); increase the ridge or use fewer points")]
    IllConditioned { estimate: f64 },

    #[error("point cloud is not a tensor grid; multilinear back-end needs one")]
    BackendMismatch,

    #[error("non-finite value at {context}")]
    NumericOverflow { context: String },

    #[error("Picard iteration diverged at node {node} (x = {x:?})")]
    PicardDivergence { node: usize, x: Vec<f64> },

    #[error("BSDE step failed at level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid benchmark case: denominator not positive at t = {t}")]
    InvalidCase { t: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
