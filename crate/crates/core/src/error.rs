use thiserror::Error;

pub type Result<T> = std::result::Result<T, GopaError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GopaError {
    #[error("invalid input at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("cell ({expert}, {attribute}) has no ranked alternative")]
    EmptyCell { expert: String, attribute: String },

    #[error("rank {rank} at `{path}` is outside [1, {max}]")]
    ContextRange { path: String, rank: i64, max: usize },

    #[error("duplicate {kind} constraint at rank {rank} in `{path}`")]
    DuplicateConstraint {
        path: String,
        kind: &'static str,
        rank: usize,
    },

    #[error("sign error at `{path}`: {message}")]
    Sign { path: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible preference context: {0}")]
    InfeasibleContext(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("x = {0} lies on a segment boundary")]
    Breakpoint(f64),

    #[error("utility shape error in cell ({expert}, {attribute}): {message}")]
    UtilityShape {
        expert: String,
        attribute: String,
        message: String,
    },

    #[error("decomposition requires a problem without missing or duplicate ranks")]
    DecompositionUnsupported,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("second-stage program is infeasible at z* = {0}")]
    InfeasibleStage2(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("{0} experts exceed the permutation limit of {max}", max = crate::sensitivity::MAX_PERMUTED_EXPERTS)]
    TooManyExperts(usize),

    #[error("need at least 4 samples, got {0}")]
    SampleSize(usize),

    #[error("cell ({expert}, {attribute}): {source}")]
    InCell {
        expert: String,
        attribute: String,
        source: Box<GopaError>,
    },
}

impl GopaError {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        GopaError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_cell(self, expert: &str, attribute: &str) -> Self {
        GopaError::InCell {
            expert: expert.to_string(),
            attribute: attribute.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping cell annotations.
    pub fn root(&self) -> &GopaError {
        match self {
            GopaError::InCell { source, .. } => source.root(),
            other => other,
        }
    }
}
