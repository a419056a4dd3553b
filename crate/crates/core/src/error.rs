use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Nyquist violation: {0}")]
    NyquistViolation(String),
    #[error("invalid signal spec: {0}")]
    InvalidSpec(String),
    #[error("time {t_s} s outside [0, {period_s}) s")]
    OutOfRange { t_s: f64, period_s: f64 },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("start time mismatch: {0} s vs {1} s")]
    StartMismatch(f64, f64),
    #[error("step period {step_period_s} s is not an integer multiple of SUT period {sut_period_s} s")]
    PeriodMismatch { step_period_s: f64, sut_period_s: f64 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("index {index} outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("plan has not been validated against the SUT period")]
    PlanNotValidated,
    #[error("no reference pulse found: {0}")]
    NoReferenceFound(String),
    #[error("insufficient data: need {needed} samples from {start}, have {available}")]
    InsufficientData { start: usize, needed: usize, available: usize },
    #[error("frame of {len} samples is not divisible into {n_steps} steps")]
    LengthIndivisible { len: usize, n_steps: usize },
    #[error("signal of {len} samples is shorter than the {window} sample window")]
    SignalTooShort { len: usize, window: usize },
    #[error("frequency {0} Hz outside the spectrogram frequency axis")]
    FrequencyOutOfAxis(f64),
    #[error("ridges have no overlapping columns")]
    EmptyOverlap,
    #[error("no separation in the search grid was resolved")]
    NoneResolved,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Machine-readable category name, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NyquistViolation(_) => "NyquistViolation",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::RateMismatch(..) => "RateMismatch",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::StartMismatch(..) => "StartMismatch",
            Error::PeriodMismatch { .. } => "PeriodMismatch",
            Error::InvalidPlan(_) => "InvalidPlan",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::PlanNotValidated => "PlanNotValidated",
            Error::NoReferenceFound(_) => "NoReferenceFound",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::LengthIndivisible { .. } => "LengthIndivisible",
            Error::SignalTooShort { .. } => "SignalTooShort",
            Error::FrequencyOutOfAxis(_) => "FrequencyOutOfAxis",
            Error::EmptyOverlap => "EmptyOverlap",
            Error::NoneResolved => "NoneResolved",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
