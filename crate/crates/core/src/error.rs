use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid map configuration: {0}")]
    InvalidMap(String),
    #[error("inverse branch {branch} did not converge")]
    RootFinding { branch: usize },
    #[error("expansion profile inconsistent: {0}")]
    Inconsistent(String),
    #[error("(H2) violated: Omega needs {q} branch domains but deg(g) = {deg}")]
    H2Violation { q: usize, deg: usize },
    #[error("theta >= 1: alpha too large (alpha = {alpha}, bound = {bound})")]
    ThetaTooLarge { alpha: f64, bound: f64 },
    #[error("orbit segment has length zero")]
    EmptySegment,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("backward itinerary ambiguous at depth {depth}: insufficient burn-in")]
    InsufficientBurnIn { depth: usize },
    #[error("specification gluing failed: {0}")]
    Glue(String),
    #[error("n = {n} too large for exhaustive enumeration (limit {limit}); use sampling")]
    TooLarge { n: usize, limit: usize },
    #[error("cone iteration did not settle: final angle change {angle:e}")]
    ConeIteration { angle: f64 },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
