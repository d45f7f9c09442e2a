//! Error types for the solver pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` out of range: {value} (accepted: {range})")]
    OutOfRange {
        key: String,
        value: String,
        range: String,
    },
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field evaluated exactly at singular point ({x}, {y}) without regularization")]
    SingularPoint { x: f64, y: f64 },
    #[error("degenerate field: {0}")]
    Degenerate(String),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace exceeded {max_steps} steps without closing or exiting (start ({x}, {y}))")]
    MaxSteps { x: f64, y: f64, max_steps: usize },
    #[error("runaway open trace from ({x}, {y}): step budget {max_steps} exhausted inside the domain")]
    Runaway { x: f64, y: f64, max_steps: usize },
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("classification failed at node ({i}, {j}): {source}")]
    Trace {
        i: i32,
        j: i32,
        source: TraceError,
    },
}

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature requires a closed field line")]
    OpenLine,
    #[error("quadrature point ({x}, {y}) outside the domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("field line has too few points for quadrature")]
    Degenerate,
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("empty quadrature set for cut node ({i}, {j})")]
    EmptyQuadrature { i: i32, j: i32 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("numerically singular system")]
    Singular,
    #[error("system is not square or empty")]
    NonSquare,
}

/// Umbrella error for the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
