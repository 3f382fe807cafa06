use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Joint whose angle could not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Joint {
    Shoulder,
    Elbow,
    Wrist,
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Joint::Shoulder => "shoulder",
            Joint::Elbow => "elbow",
            Joint::Wrist => "wrist",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry at {joint}: {reason}")]
    DegenerateGeometry { joint: Joint, reason: String },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("malformed angle packet: {0}")]
    PacketFormat(String),

    #[error("cannot merge streams: {0}")]
    Unmergeable(String),

    #[error("insufficient data: need at least {needed} samples, got {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("insufficient segment boundaries: need at least 2 minima, found {found}")]
    InsufficientBoundaries { found: usize },

    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error("cannot log-normalize row {row}, channel {channel}, feature {feature}: value {value}")]
    Normalization {
        row: usize,
        channel: usize,
        feature: String,
        value: f64,
    },

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("SMO did not converge after {iterations} iterations (max KKT violation {max_violation:.3e})")]
    Convergence {
        iterations: usize,
        max_violation: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::DegenerateGeometry { .. } => "degenerate_geometry",
            Error::Format { .. } => "format",
            Error::Data { .. } => "data",
            Error::PacketFormat(_) => "packet_format",
            Error::Unmergeable(_) => "unmergeable",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InsufficientBoundaries { .. } => "insufficient_boundaries",
            Error::InternalConsistency(_) => "internal_consistency",
            Error::Normalization { .. } => "normalization",
            Error::InvalidTrainingSet(_) => "invalid_training_set",
            Error::Convergence { .. } => "convergence",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by how the tool was invoked or configured,
    /// as opposed to problems with the data being processed.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter(_))
    }
}
