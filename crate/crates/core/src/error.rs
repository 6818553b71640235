use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precision exhausted at {bits} bits")]
    PrecisionExhausted { bits: u32 },
    #[error("map is not differentiable at the requested point")]
    NotDifferentiable,
    #[error("point lies on a critical point")]
    AtCriticalPoint,
    #[error("operation requires a C^3 map")]
    NotSmooth,
    #[error("root isolation failed: {0}")]
    RootIsolation(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid homeomorphism: {0}")]
    InvalidHomeo(String),
    #[error("uncertain symbol at index {index} precedes the first disagreement")]
    UncertainPrefix { index: usize },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("base point is a preimage of a critical point at depth {depth}")]
    TruncatedByCriticalHit { depth: usize },
    #[error("only {gaps} shadowing gaps available, at least 10 required")]
    InsufficientHorizon { gaps: usize },
    #[error("only {pairs} data pairs available, at least 10 required")]
    InsufficientData { pairs: usize },
    #[error("branch index {0} out of range")]
    BadBranch(usize),
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot parse number {0:?}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
