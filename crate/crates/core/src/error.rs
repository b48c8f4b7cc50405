use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("epoch out of bounds for trial {trial_index}: onset at {onset_time_s} s")]
    EpochOutOfBounds { trial_index: usize, onset_time_s: f64 },

    #[error("filter design: {0}")]
    FilterDesign(String),

    #[error("signal too short: {len} samples, need more than {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate baseline: zero variance in baseline window")]
    DegenerateBaseline,

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("invalid window spec: {0}")]
    InvalidWindowSpec(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("non-finite feature value")]
    NonFiniteFeatures,

    #[error("dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few trials: {n}, need at least {min}")]
    TooFewTrials { n: usize, min: usize },

    #[error("degenerate pairs: all differences are zero")]
    DegeneratePairs,

    #[error("p-value {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("trial {0} was not correctly detected")]
    IncorrectTrial(usize),

    #[error("misaligned datasets: {0}")]
    Misaligned(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
