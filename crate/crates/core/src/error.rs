use thiserror::Error;

/// Errors raised by the computational modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("superluminal boost: |beta| = {0} must be < 1")]
    SuperluminalBoost(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("component index {index} out of range ({len} components)")]
    ComponentIndex { index: usize, len: usize },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("sample window [{start}, {end}] does not cover [-{half_width}, {half_width}]")]
    WindowNotCovered {
        start: f64,
        end: f64,
        half_width: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("mean component has no envelope equation")]
    ZeroFrequency,

    #[error("profile `{0}` does not provide the derivatives this check needs")]
    UnsupportedProfile(String),

    #[error("profile is not separable against the supplied potential (mismatch {mismatch:e} at event {event})")]
    NotSeparable { mismatch: f64, event: usize },

    #[error("{kind} profile has no time-independent potential at beta = {beta}")]
    NoSeparablePotential { kind: String, beta: f64 },

    #[error("mass parameters give omega = {from_mass}, but the component oscillates at {field}")]
    MassMismatch { from_mass: f64, field: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e}, tolerance {tolerance:e})")]
    SolverDivergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("state became non-finite at step {0}")]
    NonFiniteState(usize),

    #[error("Fourier mode amplitude {0:e} is below the detection threshold")]
    SignalTooWeak(f64),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
