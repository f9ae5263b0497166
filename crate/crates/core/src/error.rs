use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not a member of the polytope (infeasibility {residual:.3e})")]
    NotMember { residual: f64 },

    #[error("polytope needs at least one finite vertex")]
    EmptyPolytope,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("linear program is infeasible (phase-one residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("({t}, {x:?}) lies outside the domain [0, T] x Omega")]
    OutOfDomain { t: f64, x: Vec<f64> },

    #[error("({t}, {x:?}) is not covered by any cone cell")]
    NotCovered { t: f64, x: Vec<f64> },

    #[error(
        "cone cover too coarse: cell {cell} oscillates by {observed:.3e} > {allowed:.3e}; refine the modulus"
    )]
    CoverTooCoarse {
        cell: usize,
        observed: f64,
        allowed: f64,
    },

    #[error("cone cover would need {cells} cells (limit {limit})")]
    CoverTooFine { cells: f64, limit: usize },

    #[error("strip count {strips:.3e} exceeds the limit {limit}")]
    TooManyStrips { strips: f64, limit: u64 },

    #[error("base selection left co F at ({t}, {x:?}): {reason}")]
    DecompositionFailed { t: f64, x: Vec<f64>, reason: String },

    #[error("schedule infeasible at level {level}: {reason}")]
    ScheduleInfeasible { level: usize, reason: String },

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("scenario: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Whether the error reports a broken hypothesis or schedule rather than a bug or bad input.
    pub fn is_hypothesis(&self) -> bool {
        matches!(
            self,
            Error::Hypothesis(_)
                | Error::ScheduleInfeasible { .. }
                | Error::CoverTooFine { .. }
                | Error::CoverTooCoarse { .. }
                | Error::TooManyStrips { .. }
                | Error::DecompositionFailed { .. }
        )
    }
}
