use thiserror::Error;

/// Errors raised anywhere in the geometry pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },

    #[error("jet order {0} not supported (0..=3)")]
    UnsupportedOrder(usize),

    #[error("jet shape mismatch: ({0}, {1}) vs ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),

    #[error("division by a jet with zero value part")]
    ZeroDivisor,

    #[error("square root of nonpositive value {0}")]
    NonPositiveSqrt(f64),

    #[error("point {0:?} lies outside the chart domain")]
    OutsideDomain(Vec<f64>),

    #[error("matrix value part is singular")]
    Singular,

    #[error("{op} requires dimension {expected}, got {got}")]
    WrongDimension {
        op: &'static str,
        expected: String,
        got: usize,
    },

    #[error("metric `{0}` is not tagged as a Walker metric")]
    NotWalker(String),

    #[error("fiber metric of `{0}` depends on u; closed forms do not apply")]
    FiberDependsOnU(String),

    #[error("gauge transform needs a metric with vanishing lambda; `{0}` has lambda != 0")]
    NonzeroLambda(String),

    #[error("gauge function must not depend on v")]
    GaugeDependsOnV,

    #[error("family constraint violated: {0}")]
    FamilyConstraint(String),

    #[error("transport path leaves the chart domain at {0:?}")]
    PathExitsDomain(Vec<f64>),

    #[error("parallel transport drifted from metric compatibility by {0:e}")]
    TransportDrift(f64),

    #[error("matrix is not skew-symmetric (defect {0:e})")]
    NotSkew(f64),

    #[error("coordinate map has singular Jacobian at {0:?}")]
    SingularJacobian(Vec<f64>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
