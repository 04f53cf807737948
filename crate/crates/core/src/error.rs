//! Error types shared across the crate.

use thiserror::Error;

/// Validation failure while constructing a game.
///
/// Each variant maps to a stable diagnostic code so that document parsers
/// can surface machine-readable errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameValidationError {
    #[error("prior sums to {sum} (must be 1 within 1e-12)")]
    PriorSum { sum: f64 },
    #[error("prior entry {index} is {value} (must be > 0)")]
    PriorNonPositive { index: usize, value: f64 },
    #[error("prior has {got} entries for {expected} states")]
    PriorLength { expected: usize, got: usize },
    #[error("action {index} is empty")]
    ActionEmpty { index: usize },
    #[error("actions {first} and {second} use the same resource subset")]
    ActionDuplicate { first: usize, second: usize },
    #[error("resource `{resource}` appears in no action")]
    ResourceUnused { resource: String },
    #[error("cost curve missing for resource `{resource}`, state `{state}`")]
    CurveMissing { resource: String, state: String },
    #[error("cost curve for resource `{resource}`, state `{state}`: {source}")]
    Curve {
        resource: String,
        state: String,
        source: CurveError,
    },
    #[error("duplicate label `{label}`")]
    DuplicateLabel { label: String },
    #[error("game has no {what}")]
    Empty { what: &'static str },
}

impl GameValidationError {
    /// Stable diagnostic code for document-level error reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Self::PriorSum { .. } => "PRIOR_SUM",
            Self::PriorNonPositive { .. } => "PRIOR_NONPOSITIVE",
            Self::PriorLength { .. } => "PRIOR_LENGTH",
            Self::ActionEmpty { .. } => "ACTION_EMPTY",
            Self::ActionDuplicate { .. } => "ACTION_DUPLICATE",
            Self::ResourceUnused { .. } => "RESOURCE_UNUSED",
            Self::CurveMissing { .. } => "CURVE_MISSING",
            Self::Curve { source, .. } => source.code(),
            Self::DuplicateLabel { .. } => "DUPLICATE_LABEL",
            Self::Empty { .. } => "EMPTY_COMPONENT",
        }
    }
}

/// Validation failure for a single piecewise-polynomial cost curve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("breakpoints must start at 0 and end at 1, got [{first}, .., {last}]")]
    BadRange { first: f64, last: f64 },
    #[error("breakpoints must be strictly increasing at index {index}")]
    NotIncreasing { index: usize },
    #[error("{pieces} pieces for {breakpoints} breakpoints (need breakpoints - 1)")]
    PieceCount { breakpoints: usize, pieces: usize },
    #[error("discontinuity {jump:.3e} at breakpoint {at} (tolerance 1e-12)")]
    Discontinuous { at: f64, jump: f64 },
    #[error("non-finite coefficient in piece {piece}")]
    NonFinite { piece: usize },
}

impl CurveError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadRange { .. } => "CURVE_RANGE",
            Self::NotIncreasing { .. } => "CURVE_BREAKPOINTS",
            Self::PieceCount { .. } => "CURVE_PIECES",
            Self::Discontinuous { .. } => "CURVE_DISCONTINUOUS",
            Self::NonFinite { .. } => "CURVE_NONFINITE",
        }
    }
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error(transparent)]
    InvalidGame(#[from] GameValidationError),
    #[error("invalid outcome: {0}")]
    InvalidOutcome(String),
    #[error("invalid information structure: {0}")]
    InvalidStructure(String),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("no convergence after {iters} iterations (best gap {best_gap:.3e})")]
    Convergence { iters: usize, best_gap: f64 },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("internal consistency violated: {0}")]
    Internal(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("linear program infeasible (phase-1 residual {residual:.3e})")]
    Infeasible { residual: f64, certificate: Vec<f64> },
    #[error("linear program unbounded")]
    Unbounded,
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
