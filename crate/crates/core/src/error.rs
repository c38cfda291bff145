use thiserror::Error;

/// Errors raised by the workbench.
///
/// Variants split into two families: invalid input (the caller asked for
/// something that does not make sense) and numerical failure (the input was
/// fine but the computation broke down). [`Error::is_numerical`] tells them
/// apart, which the CLI uses to choose its exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: String, reason: String },

    #[error("order p = {0} is not supported here")]
    UnsupportedOrder(usize),

    #[error("Legendre coefficient b(i={i}, m={m}, n={n}) is undefined (n - m - 2i < 0)")]
    UndefinedCoefficient { i: usize, m: usize, n: usize },

    #[error("correction system is singular (pivot ratio {pivot_ratio:.3e})")]
    SingularSystem { pivot_ratio: f64 },

    #[error("OSFR parameter gives 1 + eta = 0")]
    SingularEta,

    #[error("ESFR denominator vanishes: {0}")]
    SingularDenominator(&'static str),

    #[error("degenerate coefficient: {0}")]
    DegenerateCoefficient(String),

    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,

    #[error("run became unstable at t = {time:.6} ({detail})")]
    UnstableRun { time: f64, detail: String },

    #[error("no grid point satisfied the order constraint ({tested} tested)")]
    EmptyFeasibleSet { tested: usize },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the computation itself rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::SingularEta
                | Error::SingularDenominator(_)
                | Error::DegenerateCoefficient(_)
                | Error::ConvergenceFailure
                | Error::UnstableRun { .. }
                | Error::EmptyFeasibleSet { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
