use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpsError {
    #[error("grid needs at least 16 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("non-positive domain: r_max = {0}")]
    NonPositiveDomain(f64),
    #[error("stretch must be >= 1, got {0}")]
    BadStretch(f64),
    #[error("p outside (3,6): p = {0}")]
    ExponentOutOfRange(f64),
    #[error("exponent q must be >= 1, got {0}")]
    BadLpExponent(f64),
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("eps must be non-negative and finite, got {0}")]
    BadEps(f64),
    #[error("fiber scale t must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("fiber map has no maximizer for u=0")]
    ZeroProfile,
    #[error("breakdown is off the Pohozaev manifold (relative residual {0:e})")]
    OffManifold(f64),
    #[error("oracle is for desk-scale cross-checks (n = {0} > 512)")]
    OracleTooLarge(usize),
    #[error("profiles live on different grids")]
    GridMismatch,
    #[error("profile contains non-finite values")]
    NonFinite,
    #[error("length mismatch: grid has {expected} nodes, values have {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("collapse to zero: |u|_p^p underflowed (bad initialization)")]
    Collapse,
    #[error("not converged after {iters} iterations (ode residual {ode_sup:e})")]
    NotConverged {
        iters: usize,
        ode_sup: f64,
        best: Box<crate::solver::Solution>,
    },
    #[error("shooting requires eps>0")]
    ShootingNeedsMass,
    #[error("SCF stagnation: damping floor reached after {0} iterations")]
    ScfStagnation(usize),
    #[error("tail below floating-point floor")]
    TailUnderflow,
    #[error("invalid eps list: {0}")]
    BadEpsList(String),
    #[error("invalid lambda list: {0}")]
    BadLambdaList(String),
    #[error("projection onto the limit manifold needs eps > 0")]
    ZeroMassProjection,
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpsError {
    fn from(e: std::io::Error) -> Self {
        SpsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SpsError>;
