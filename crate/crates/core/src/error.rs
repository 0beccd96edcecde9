use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dispersion must be positive, got {0}")]
    InvalidDispersion(f64),
    #[error("path is not strictly positive (value {value} at index {index})")]
    NonPositivePath { index: usize, value: f64 },
    #[error("invalid diffeomorphism: {0}")]
    InvalidDiffeo(String),
    #[error("parameter outside domain: {0}")]
    DomainError(String),
    #[error("sup-norm {0} exceeds 1/4")]
    NormTooLarge(f64),
    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("quadrature failed: estimated relative error {estimate:e} above {tolerance:e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },
    #[error("proposal {0} does not cover (0, inf)")]
    ProposalMismatch(String),
    #[error("effective sample size {ess:.1} below 1% of {n}")]
    DegenerateWeights { ess: f64, n: usize },
    #[error("complex path modulus {modulus:e} too small at index {index}")]
    VanishingPath { index: usize, modulus: f64 },
    #[error("phase increment {increment} between nodes {index} and {} exceeds the unwrap limit", index + 1)]
    BranchJump { index: usize, increment: f64 },
    #[error("grid is not uniform on [0,1] at row {row}: t = {t}")]
    NonUniformGrid { row: usize, t: f64 },
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
