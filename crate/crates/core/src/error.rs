use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular denominator (constant term {value:e})")]
    SingularDenominator { value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("flow diverged: {0}")]
    FlowDivergence(String),
    #[error("step too large: Richardson disagreement {disagreement:e} exceeds {limit:e}")]
    StepTooLarge { disagreement: f64, limit: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("jet-order violation in {field}: identifier `{ident}` is not allowed there")]
    JetOrder { field: String, ident: String },
    #[error("Lagrangian is not affine in vp: second derivative {value:e} in directions ({a}, {b})")]
    NonAffine { a: usize, b: usize, value: f64 },
    #[error("matrix A is not skew-symmetric (defect {defect:e})")]
    NotSkew { defect: f64 },
    #[error("singular bracket: N² = {0:e}")]
    SingularBracket(f64),
    #[error("constraint drift {drift:e} at step {step} exceeds {limit:e}")]
    ConstraintDrift { step: usize, drift: f64, limit: f64 },
    #[error("{skipped} of {total} samples failed to evaluate (last error: {last})")]
    SampleDomain {
        skipped: usize,
        total: usize,
        last: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
