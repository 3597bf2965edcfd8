use alloc::string::String;

/// Errors raised by the identification pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter violates its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The polynomial exactness constraints cannot all be met.
    #[error(
        "constraint system has rank {rank} but {required} exactness conditions were requested"
    )]
    RankDeficient { rank: usize, required: usize },

    /// The filter solve finished but its constraint residual is too large.
    #[error("filter constraint residual {residual:e} exceeds tolerance {tolerance:e}")]
    Conditioning { residual: f64, tolerance: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Not enough samples to fill a single filter window.
    #[error("empty design: {samples} samples cannot fill a window spanning {required}")]
    EmptyDesign { samples: usize, required: usize },

    #[error("singular design: smallest singular value {sigma_min:e}")]
    Singular { sigma_min: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The integrator produced a non-finite state.
    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("insufficient data: need at least {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// A short stable identifier for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Conditioning { .. } => "conditioning",
            Error::Dimension { .. } => "dimension",
            Error::EmptyDesign { .. } => "empty_design",
            Error::Singular { .. } => "singular",
            Error::NonFinite(_) => "non_finite",
            Error::Divergence { .. } => "divergence",
            Error::InsufficientData { .. } => "insufficient_data",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
