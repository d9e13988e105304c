use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input file is malformed or in an unsupported format.
    #[error("format error: {0}")]
    Format(String),

    /// An input is degenerate (e.g. constant raster with no value range).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numerical procedure failed (factorization breakdown, singular pivot).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Evaluation outside a constitutive model's admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The nonlinear solver failed to converge.
    #[error("solver failure at load step {step}: {detail}")]
    SolverFailure { step: usize, detail: String },

    /// Training hit a non-finite loss; carries the diagnostic snapshot.
    #[error("training aborted at iteration {iteration}: pde={l_pde}, const={l_const}, data={l_data}")]
    TrainingAborted {
        iteration: usize,
        l_pde: f64,
        l_const: f64,
        l_data: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
