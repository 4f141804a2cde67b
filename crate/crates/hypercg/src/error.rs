//! Error type shared by mesh construction, problem setup and the solver.

use std::fmt;

#[derive(Debug)]
pub enum SolverError {
    /// Bad user input (mesh sizes, degrees, config keys).
    InvalidArgument(String),
    /// Polynomial degree not supported in the requested dimension.
    UnsupportedDegree { degree: usize, dim: usize },
    /// Unknown benchmark preset name.
    UnknownPreset(String),
    /// A state left the admissible set where the scheme requires membership.
    InadmissibleState { context: String },
    /// The pressure function of a Riemann problem has no positive root.
    VacuumFormation,
    /// An iterative solve failed to reach its tolerance.
    NonConvergence { what: String, residual: f64 },
    /// A fake time step exceeded its certified bound.
    CflViolation { context: String },
    /// Configuration file / flag errors.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            SolverError::UnsupportedDegree { degree, dim } => {
                write!(f, "degree {degree} unsupported in {dim}D (only Q1 in 2D)")
            }
            SolverError::UnknownPreset(name) => write!(f, "unknown preset '{name}'"),
            SolverError::InadmissibleState { context } => {
                write!(f, "inadmissible state: {context}")
            }
            SolverError::VacuumFormation => write!(f, "vacuum formation in Riemann problem"),
            SolverError::NonConvergence { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:.3e})")
            }
            SolverError::CflViolation { context } => write!(f, "CFL violation: {context}"),
            SolverError::Config(msg) => write!(f, "config error: {msg}"),
            SolverError::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<std::io::Error> for SolverError {
    fn from(err: std::io::Error) -> Self {
        SolverError::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
