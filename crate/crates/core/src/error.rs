use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix contains a non-finite entry")]
    NotFinite,

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("map is not completely positive (min Choi eigenvalue {min_eigenvalue:.3e})")]
    NotCp { min_eigenvalue: f64 },

    #[error("map is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("map is not trace non-increasing (max excess eigenvalue {excess:.3e})")]
    TraceIncreasing { excess: f64 },

    #[error("effects do not sum to the identity (residual {residual:.3e})")]
    Incomplete { residual: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    #[error("ensemble weights invalid: {0}")]
    InvalidWeights(String),

    #[error("target ensemble does not mix to the reduced state (residual {residual:.3e})")]
    TargetMismatch { residual: f64 },

    #[error("target member {index} leaves the support of the reduced state")]
    UnsupportedMember { index: usize },

    #[error("state is not pure (purity {purity:.6})")]
    NotPure { purity: f64 },

    #[error("pulled-back effect `{label}` is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    NonPositiveEffect { label: String, min_eigenvalue: f64 },

    #[error("lemma premise violated: trace-pairing residual {residual:.3e}")]
    PremiseViolated { residual: f64 },

    #[error("ensembles do not have the same mixture (residual {residual:.3e})")]
    MixMismatch { residual: f64 },

    #[error("duplicate outcome label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown outcome label `{0}`")]
    UnknownLabel(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
