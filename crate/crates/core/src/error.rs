use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("context schedule has {available} rounds but {requested} were requested")]
    ScheduleTooShort { available: usize, requested: usize },

    #[error("action {action} is outside [0, {num_actions})")]
    InvalidAction { action: usize, num_actions: usize },

    #[error("invalid decay profile: {0}")]
    InvalidDecay(String),

    #[error("effective dimension exceeds the scan cap of {cap}")]
    EffDimOverflow { cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature index {0} is not valid for this family")]
    InvalidFeatureIndex(usize),

    #[error("context item kind does not match the feature family: {0}")]
    ContextMismatch(String),

    #[error("parameter kind does not match the feature model")]
    ModelMismatch,

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("instance too small: {0}")]
    InstanceTooSmall(String),

    #[error("bad action sequence: {0}")]
    BadActionSequence(String),

    #[error("beta out of range: {0}")]
    BetaOutOfRange(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("packing failed: placed {placed} of {required} points")]
    PackingFailed { placed: usize, required: usize },

    #[error("policy does not support this model: {0}")]
    UnsupportedModel(String),

    #[error("grid has {atoms} atoms, budget is {budget}")]
    GridTooLarge { atoms: usize, budget: usize },

    #[error("distributions have different supports ({0} vs {1})")]
    SupportMismatch(usize, usize),

    #[error("scaling fit undefined: {0}")]
    FitUndefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ScheduleTooShort { .. } => "ScheduleTooShort",
            Error::InvalidAction { .. } => "InvalidAction",
            Error::InvalidDecay(_) => "InvalidDecay",
            Error::EffDimOverflow { .. } => "EffDimOverflow",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidFeatureIndex(_) => "InvalidFeatureIndex",
            Error::ContextMismatch(_) => "ContextMismatch",
            Error::ModelMismatch => "ModelMismatch",
            Error::InvalidContext(_) => "InvalidContext",
            Error::InstanceTooSmall(_) => "InstanceTooSmall",
            Error::BadActionSequence(_) => "BadActionSequence",
            Error::BetaOutOfRange(_) => "BetaOutOfRange",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::PackingFailed { .. } => "PackingFailed",
            Error::UnsupportedModel(_) => "UnsupportedModel",
            Error::GridTooLarge { .. } => "GridTooLarge",
            Error::SupportMismatch(..) => "SupportMismatch",
            Error::FitUndefined(_) => "FitUndefined",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
