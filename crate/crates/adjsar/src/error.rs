use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("zero row {row} under row normalization (isolated vertex)")]
    ZeroRow { row: usize },

    #[error("matrix has zero spectral radius")]
    ZeroSpectralRadius,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("eigenvalue {omega} is not semisimple (algebraic {algebraic}, geometric {geometric})")]
    NotSemisimple { omega: f64, algebraic: usize, geometric: usize },

    #[error("projector for eigenvalue {omega} is ill-conditioned (l'h = {pivot:e})")]
    IllConditionedProjector { omega: f64, pivot: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("S(lambda) is singular at lambda = {0}")]
    SingularS(f64),

    #[error("degenerate data: residual quadratic form vanishes at lambda = {0}")]
    PerfectFit(f64),

    #[error("W needs at least one negative and one positive real eigenvalue")]
    MissingSignedEigenvalue,

    #[error("Assumption 1 violated at ω={omega}")]
    Assumption1 { omega: f64 },

    #[error("Assumption 2 fails: {0}")]
    Assumption2(String),

    #[error("LLL transformation inapplicable: block {block} does not have unit row sums")]
    LllInapplicable { block: usize },

    #[error("saddlepoint equation failed: {0}")]
    Saddlepoint(String),

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
