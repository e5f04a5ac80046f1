use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} needs {qubits} qubits, above the dense cap of {cap} (set ODEQ_DENSE_CAP to raise it)")]
    Capacity {
        what: &'static str,
        qubits: usize,
        cap: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("operator is not Hermitian: {0}")]
    NonHermitian(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(
        "dissipative condition violated: Hermitian part has eigenvalue {eigenvalue:.6e} > 0; \
         shifting A by -{shift:.6e}*I would restore it"
    )]
    DissipativeConditionViolated { eigenvalue: f64, shift: f64 },

    #[error("state has zero norm")]
    DegenerateState,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("success probability underflowed to {norm_sq:e} at step {step}")]
    SuccessUnderflow { step: usize, norm_sq: f64 },

    #[error("target solution has zero norm; no step count reaches a relative error")]
    UnsolvableTarget,

    #[error("no shot survived post-selection ({shots} shots)")]
    NoSurvivors { shots: usize },

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
