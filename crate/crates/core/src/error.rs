use std::fmt;

/// Errors shared by every module of the toolkit.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Matrix inversion failed: |det| below the machine-scaled threshold.
    SingularMatrix { det_abs: f64, threshold: f64 },
    /// Step size fell below the relative underflow guard.
    StepSizeUnderflow { t: f64, h: f64 },
    /// The integrator exceeded its step budget before reaching the end time.
    MaxStepsExceeded { t: f64, max_steps: usize },
    /// The right-hand side or the state produced a NaN/Inf.
    NonFiniteState { t: f64 },
    /// Dense evaluation requested outside the trajectory span.
    OutOfSpan { t: f64, span: (f64, f64) },
    /// An argument violated a mathematical domain restriction.
    DomainError(String),
    /// Closed-form l(z) requested for a custom symmetry class.
    UnsupportedClass,
    /// Finite-difference stencil requested at a grid boundary node.
    BoundaryNode { i: usize, j: usize },
    /// The two conformal-factor quadratures (or z columns) disagree.
    InconsistentF { spread: f64, limit: f64 },
    /// The grid is too small for the interior residual stencil.
    GridTooSmall { nt: usize, nz: usize },
    /// The spectral parameter ran into a pole of the linear system.
    PoleCollision { lambda: (f64, f64), sigma: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularMatrix { det_abs, threshold } => {
                write!(f, "singular matrix: |det| = {det_abs:.3e} <= {threshold:.3e}")
            }
            Error::StepSizeUnderflow { t, h } => {
                write!(f, "step size underflow at t = {t}: h = {h:.3e}")
            }
            Error::MaxStepsExceeded { t, max_steps } => {
                write!(f, "exceeded {max_steps} steps at t = {t}")
            }
            Error::NonFiniteState { t } => write!(f, "non-finite state at t = {t}"),
            Error::OutOfSpan { t, span } => {
                write!(f, "t = {t} outside trajectory span [{}, {}]", span.0, span.1)
            }
            Error::DomainError(msg) => write!(f, "domain error: {msg}"),
            Error::UnsupportedClass => {
                write!(f, "no closed-form l(z) for a custom symmetry class")
            }
            Error::BoundaryNode { i, j } => {
                write!(f, "central stencil undefined at boundary node ({i}, {j})")
            }
            Error::InconsistentF { spread, limit } => {
                write!(f, "conformal factor inconsistency {spread:.3e} exceeds {limit:.3e}")
            }
            Error::GridTooSmall { nt, nz } => {
                write!(f, "grid {nt}x{nz} too small, need at least 5x5")
            }
            Error::PoleCollision { lambda, sigma } => {
                write!(
                    f,
                    "spectral parameter {}+{}i collided with pole at sigma = {sigma}",
                    lambda.0, lambda.1
                )
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
