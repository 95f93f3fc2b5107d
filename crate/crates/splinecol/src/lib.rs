//! Stabilized B-spline collocation for hyperbolic conservation laws.
//!
//! This crate discretizes 1D/2D (and in principle 3D) conservation laws
//! `phi_t + div f(phi) = 0` with smooth B-spline spaces collocated at Greville
//! points, and keeps the schemes stable around shocks with a residual-based
//! artificial viscosity plus an optional linear coarse-interpolation term.
//! Everything is built around tensor-product structure: 1D banded solves are
//! the only linear algebra that ever happens, applied direction by direction.
//!
//! The high-level entry points are [`cases::builtin_case`] to get one of the
//! packaged test problems, [`system::SemiDiscreteSystem`] to assemble the
//! semi-discretization, and [`system::run`] to advance it with RK4. The
//! `verification` module carries exact solutions and a first-order
//! finite-volume reference used for convergence studies.

pub mod banded;
pub mod cases;
pub mod config;
pub mod error;
pub mod exact;
pub mod fv;
pub mod law;
pub mod norms;
pub mod output;
pub mod spline;
pub mod stab;
pub mod system;
pub mod tensor;

pub use error::SolverError;
pub use spline::{FieldCoeffs, SplineSpace1D, TensorSpace, Topology};
