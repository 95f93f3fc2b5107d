//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SolverError {
    #[error("invalid spline space: {0}")]
    InvalidSpace(String),

    #[error("singular interpolation matrix for {space} (pivot {pivot:.3e} at row {row})")]
    SingularInterpolation {
        space: String,
        row: usize,
        pivot: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("non-admissible state at t = {t:.6e}, x = {location:?}: {what} = {value:.6e}")]
    NonAdmissibleState {
        t: f64,
        location: Vec<f64>,
        what: &'static str,
        value: f64,
    },

    #[error("simulation blew up at step {step} (t = {t:.6e}): non-finite {what}")]
    BlowUp {
        step: usize,
        t: f64,
        what: &'static str,
    },

    #[error("characteristic crossing detected (Jacobian {jacobian:.3e} at x = {x:.6e}, t = {t:.6e})")]
    CharacteristicCrossing { x: f64, t: f64, jacobian: f64 },

    #[error("Riemann solver failed to converge: {0}")]
    RiemannNoConvergence(String),

    #[error("vacuum generated in Riemann problem (u_R - u_L = {0:.6e} exceeds pressure positivity bound)")]
    RiemannVacuum(f64),

    #[error("no exact solution available for case `{0}`")]
    NoExactSolution(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
