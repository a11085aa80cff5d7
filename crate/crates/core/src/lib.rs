//! Finite element optimal control of a two-dimensional obstacle problem
//! with a matrix-valued diffusion coefficient.
//!
//! The obstacle constraint `u >= ψ` is relaxed by a smoothed-max penalty
//! of strength γ; the control `q` is a piecewise constant symmetric matrix
//! field with eigenvalues in `[q_min, q_max]`. Optimal controls are tracked
//! along a γ ladder and compared with an active-set solution of the
//! unregularized obstacle problem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod check;
pub mod control;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod optimize;
pub mod oracle;
pub mod par;
pub mod problem;
pub mod rates;
pub mod smoothed_max;
pub mod state;

pub use control::{project_ad, ControlField, ControlGradient, SpectralBox, Sym2};
pub use error::{Error, Result};
pub use fem::{FemSpace, LinearSolverOptions, StateField};
pub use mesh::Mesh;
pub use problem::{NodalData, ObstacleProblem, ProblemParams, SolverOptions};
pub use smoothed_max::{MaxFamily, PolynomialFamily, PolynomialMax, SmoothMax};
