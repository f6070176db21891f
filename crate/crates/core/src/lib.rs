//! Numerical toolkit for the Belinskii-Zakharov zero-curvature formulation
//! of Bianchi I, II, VI0 and VII0 cosmologies and the associated
//! Painleve III transcendent (alpha <= 0, beta >= 0, gamma = delta = 0).
//!
//! The same dynamics is carried in four equivalent shapes, each with its
//! own module and residual checks against the others:
//!
//! * [`piii`] — the scalar Painleve III equation in the (a, t), (u, tau)
//!   and (q, tau) coordinate systems;
//! * [`bianchi`] — the matrix zero-curvature equation for
//!   gamma-hat(t) = diag(a, t^2/a), metric assembly g = l^T gamma-hat l,
//!   the conformal factor and the Ernst-equation residual;
//! * [`laxpair`] — the linear systems whose flatness encodes the
//!   dynamics, plus numerical holonomies as integrals of motion;
//! * [`hamiltonian`] — the time-dependent Hamiltonian picture and its
//!   exact reparametrization.
//!
//! [`linalg`] and [`ode`] are the shared numeric substrate.

pub mod bianchi;
pub mod error;
pub mod hamiltonian;
pub mod laxpair;
pub mod linalg;
pub mod ode;
pub mod piii;

pub use error::{Error, Result};
