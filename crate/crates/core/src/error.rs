use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite input component at index {index}")]
    NonFiniteInput { index: usize },

    /// A configuration or model field failed validation. `field` names it.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("stationary gradient, cannot step")]
    StationaryGradient,

    #[error("no negative flux found within {attempts} attempts")]
    NoNegativeFlux { attempts: usize },

    #[error("point is off the sphere: distance {distance} vs radius {radius}")]
    OffSphere { distance: f64, radius: f64 },

    #[error("field not continuously differentiable (relu activation)")]
    NotSmooth,

    #[error("empty dataset")]
    EmptyDataset,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
