use thiserror::Error;

use crate::quad::QuadError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {name}={value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("model has no immigration/culling mechanism")]
    NoImmigration,

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    /// The requested quantity is only available in a regime the model does not satisfy.
    /// `inequality` names the violated condition.
    #[error("unsupported regime: {inequality} ({detail})")]
    UnsupportedRegime {
        inequality: &'static str,
        detail: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("weight is singular at v={0} (root of the branching drift)")]
    Singularity(f64),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error(transparent)]
    Quadrature(#[from] QuadError),

    #[error("admissibility violated: policy left the population at {level} <= floor {floor}")]
    Admissibility { level: u64, floor: u64 },

    #[error("model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn regime(inequality: &'static str, detail: impl Into<String>) -> Self {
        Error::UnsupportedRegime {
            inequality,
            detail: detail.into(),
        }
    }

    /// True for refusals caused by the model/parameter regime rather than bad input or numerics.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedRegime { .. } | Error::Precondition(_) | Error::Admissibility { .. }
        )
    }
}
