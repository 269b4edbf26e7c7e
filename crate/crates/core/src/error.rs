//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // problem construction
    #[error("duplicate abscissae: x[{0}] == x[{1}]")]
    DuplicateAbscissae(usize, usize),
    #[error("abscissa {0} outside [0, 1]")]
    DomainError(f64),
    #[error("too few points: n = {0}, need at least {1}")]
    TooFewPoints(usize, usize),
    #[error("knots must be strictly increasing inside the data range")]
    KnotOrderError,
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("penalty matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NonPsdPenalty(f64),
    #[error("degenerate design: all covariates identical after centering")]
    DegenerateDesign,
    #[error("functional grid must be uniform on [0,1] with at least {0} points")]
    GridError(usize),
    #[error("unknown kernel id: {0}")]
    KernelError(String),

    // fitting
    #[error("lambda must be non-negative and finite, got {0}")]
    NegativeLambda(f64),
    #[error("rho must be positive and finite, got {0}")]
    NonPositiveRho(f64),
    #[error("constraint solver failed to converge")]
    ConvergenceFailure,
    #[error("all penalized components are zero on an active boundary")]
    AllPenalizedComponentsZero,
    #[error("divergence in rho is undefined for an inactive fit; use d")]
    InactiveFit,

    // selection
    #[error("RSS must be positive, got {0}")]
    NonPositiveRss(f64),
    #[error("divergence {div} >= n = {n}: saturated fit")]
    DivergenceExceedsN { div: f64, n: usize },
    #[error("loss curve is flat (max == min)")]
    FlatLossCurve,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("grid must be strictly increasing and positive")]
    GridOrderError,

    // oracles
    #[error("system matrix is singular")]
    SingularSystem,
    #[error("problem too large for the dense oracle (d = {0} > {1})")]
    ProblemTooLarge(usize, usize),
    #[error("polar chart is singular (sin(theta_{0}) too small)")]
    SingularChart(usize),
    #[error("first fundamental form is not positive definite")]
    NonPdFirstForm,
    #[error("need at least {0} Monte-Carlo replicates, got {1}")]
    InsufficientReplicates(usize, usize),

    // io
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("config error: {0}")]
    ConfigError(String),
    #[error("missing or empty report: {0}")]
    MissingReport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
