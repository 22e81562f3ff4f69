use alloc::string::String;

/// Errors raised by the baseband building blocks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
    #[error("latency budget is infeasible: T_max = {t_max} s, preamble = {t_preamble} s")]
    InfeasibleBudget { t_max: f64, t_preamble: f64 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("value out of range: {0}")]
    Validation(String),
    #[error("correlation is undefined for a zero-variance sequence")]
    UndefinedCorrelation,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("precoder is not unitary (||V V^H - I||_F = {0:e})")]
    InvalidPrecoder(f64),
    #[error("frame structure mismatch: {0}")]
    Frame(String),
    #[error("channel delay spread of {taps} taps exceeds the cyclic prefix of {cp} samples")]
    DelaySpread { taps: usize, cp: usize },
    #[error("metric is undefined: {0}")]
    UndefinedMetric(String),
    #[error("report contains no frames")]
    EmptyReport,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
