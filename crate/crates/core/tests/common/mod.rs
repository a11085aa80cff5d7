#![allow(dead_code)]

use std::sync::Arc;

use obstacle_core::{ControlField, FemSpace, Mesh, NodalData, ObstacleProblem, ProblemParams, SolverOptions, Sym2};

pub fn space(n: usize) -> Arc<FemSpace> {
    Arc::new(FemSpace::new(Mesh::unit_square(n).unwrap()).unwrap())
}

pub fn problem(n: usize, psi: f64, f: f64, u_d: f64, alpha: f64) -> ObstacleProblem {
    let params = ProblemParams {
        psi,
        f: NodalData::Constant(f),
        u_d: NodalData::Constant(u_d),
        alpha,
        q_min: 0.5,
        q_max: 2.0,
    };
    ObstacleProblem::new(space(n), &params).unwrap()
}

pub fn reference(n: usize) -> ObstacleProblem {
    ObstacleProblem::new(space(n), &ProblemParams::reference()).unwrap()
}

pub fn identity(prob: &ObstacleProblem) -> ControlField {
    ControlField::constant(prob.space().num_triangles(), Sym2::IDENTITY, prob.bounds())
}

pub fn scalar(prob: &ObstacleProblem, s: f64) -> ControlField {
    ControlField::scalar(prob.space().num_triangles(), s, prob.bounds())
}

/// Center node of the n=2 mesh.
pub const CENTER: usize = 4;

pub fn opts() -> SolverOptions {
    SolverOptions::default()
}
