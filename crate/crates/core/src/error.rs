use thiserror::Error;

/// Errors produced by the noise pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("only {found} bound level(s) found; at least 2 are required")]
    InsufficientLevels { found: usize },

    #[error(
        "eigenpair {level} did not converge (residual {residual:.3e}) on a grid of \
         {grid_points} points with spacing {spacing_angstrom:.3e} A"
    )]
    Convergence {
        level: usize,
        residual: f64,
        grid_points: usize,
        spacing_angstrom: f64,
    },

    #[error("basis of {states} states exceeds the dimension cap of {cap}; reduce N or M")]
    Capacity { states: u128, cap: usize },

    #[error("generator is reducible: {zero_modes} stationary modes")]
    Reducible { zero_modes: usize },

    #[error("rate matrix violates detailed balance (relative residual {residual:.3e})")]
    DetailedBalance { residual: f64 },

    #[error("numerical failure: {message} (dimension {dimension}, max |M_ij| {scale:.3e})")]
    Numerical {
        message: String,
        dimension: usize,
        scale: f64,
    },

    #[error("correlator not resolved: tau grid must extend to at least {required_tau_max:.3e} s")]
    Resolution { required_tau_max: f64 },

    #[error("no spectrum supplied for patch size N = {0}")]
    MissingPatch(usize),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameters(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
