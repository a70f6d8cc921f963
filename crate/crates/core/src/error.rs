use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the inference engine and its I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("self loop at site {0}")]
    SelfLoop(usize),
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("graph is disconnected: site {0} is not reachable from site 0")]
    DisconnectedGraph(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state mean ordering violated: mu_S ({mu_last}) < mu_1 ({mu1})")]
    OrderViolation { mu1: f64, mu_last: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("parameter invariant violated: {0}")]
    InvariantViolation(String),
    #[error("sum-to-zero constraint violated: sum = {0}")]
    ConstraintViolation(f64),

    #[error("initialization failed after {0} attempts")]
    InitializationFailure(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidSamplerConfig(String),

    #[error("trajectory missing for draw {0}")]
    MissingTrajectory(usize),
    #[error("state {0} is never the most likely state")]
    EmptyState(usize),
    #[error("invalid trajectory bundle: {0}")]
    InvalidBundle(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("not enough observed cells: need {needed}, have {available}")]
    InsufficientObserved { needed: usize, available: usize },
    #[error("cell (site {site}, time {time}) is not held out in the masked panel")]
    CellNotHeldOut { site: usize, time: usize },
    #[error("holdout plans do not match: {0}")]
    PlanMismatch(String),

    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow { path: String, line: usize, message: String },
    #[error("{path}:{line}: duplicate cell (site {site}, time {time})")]
    DuplicateCell { path: String, line: usize, site: usize, time: usize },
    #[error("value out of range: {0}")]
    RangeError(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing artifacts in {dir}: {missing}")]
    MissingArtifacts { dir: PathBuf, missing: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidSamplerConfig(_) | Error::InvalidScenario(_) => 2,
            Error::InitializationFailure(_) | Error::NonFinite(_) | Error::DegenerateInput(_) => 4,
            Error::MissingArtifacts { .. } => 5,
            _ => 3,
        }
    }

    /// Short machine-parsable code, printed alongside the human message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateEdge(..) => "DUPLICATE_EDGE",
            Error::SelfLoop(_) => "SELF_LOOP",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::DisconnectedGraph(_) => "DISCONNECTED_GRAPH",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::OrderViolation { .. } => "ORDER_VIOLATION",
            Error::NonFinite(_) => "NON_FINITE",
            Error::InvariantViolation(_) => "INVARIANT_VIOLATION",
            Error::ConstraintViolation(_) => "CONSTRAINT_VIOLATION",
            Error::InitializationFailure(_) => "INITIALIZATION_FAILURE",
            Error::DegenerateInput(_) => "DEGENERATE_INPUT",
            Error::InvalidSamplerConfig(_) => "INVALID_SAMPLER_CONFIG",
            Error::MissingTrajectory(_) => "MISSING_TRAJECTORY",
            Error::EmptyState(_) => "EMPTY_STATE",
            Error::InvalidBundle(_) => "INVALID_BUNDLE",
            Error::InvalidScenario(_) => "INVALID_SCENARIO",
            Error::InsufficientObserved { .. } => "INSUFFICIENT_OBSERVED",
            Error::CellNotHeldOut { .. } => "CELL_NOT_HELD_OUT",
            Error::PlanMismatch(_) => "PLAN_MISMATCH",
            Error::MalformedRow { .. } => "MALFORMED_ROW",
            Error::DuplicateCell { .. } => "DUPLICATE_CELL",
            Error::RangeError(_) => "RANGE_ERROR",
            Error::Config(_) => "CONFIG_ERROR",
            Error::MissingArtifacts { .. } => "MISSING_ARTIFACTS",
            Error::Io { .. } => "IO_ERROR",
            Error::Csv(_) => "CSV_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
