//! P1 finite elements: assembly, discrete norms, SPD solvers and the nodal
//! field text format.

mod io;
mod solve;
mod space;
mod sparse;

pub use io::{field_to_text, format_f64, parse_field, read_field, write_field, StateField};
pub use solve::{solve_spd, BandCholesky, LinearSolve, LinearSolverKind, LinearSolverOptions};
pub use space::{stiffness_elements, FemSpace, FieldNorms};
pub use sparse::{dot, norm2, CsrPattern, SparseOperator};
