use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distance {distance} m is outside the transmission range (0, {range}] m")]
    OutOfRange { distance: f64, range: f64 },

    #[error("estimator window is empty (r + m = 0)")]
    EmptyWindow,

    #[error("negative queuing delay sample {0} s")]
    NegativeSample(f64),

    #[error("non-positive transmission delay sample {0} s (clock inconsistency)")]
    NonPositiveSample(f64),

    #[error("zero velocity denominator")]
    ZeroDenominator,

    #[error("deadline expired: lag time would be {0} s")]
    DeadlineExpired(f64),

    #[error("no forwarder pair meets the required velocity")]
    NoQualifyingPair,

    #[error("void: no neighbor makes positive progress toward the sink")]
    Void,

    #[error("queue full")]
    QueueFull,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
