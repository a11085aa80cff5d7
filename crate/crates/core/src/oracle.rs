//! Primal-dual active set solver for the unregularized discrete obstacle
//! problem `A u - b = λ`, `λ >= 0`, `u >= ψ`, `λ (u - ψ) = 0` on interior
//! nodes.

use crate::control::ControlField;
use crate::error::{Error, Result};
use crate::fem::{solve_spd, StateField};
use crate::problem::{ObstacleProblem, SolverOptions};

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub u: StateField,
    /// Algebraic multiplier `A u - b` (zero on boundary and inactive nodes).
    pub lambda: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
    /// Active set size after each iteration.
    pub active_history: Vec<usize>,
    /// `max_i max(ψ - u_i, 0, -λ_i, |λ_i (u_i - ψ)|)` over interior nodes.
    pub complementarity_violation: f64,
}

impl OracleSolution {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Largest violation of the discrete complementarity system at `(u, λ)`.
pub fn complementarity_violation(prob: &ObstacleProblem, u: &[f64], lambda: &[f64]) -> f64 {
    let psi = prob.psi();
    prob.space()
        .mesh()
        .interior_nodes()
        .iter()
        .map(|&i| (psi - u[i]).max(-lambda[i]).max((lambda[i] * (u[i] - psi)).abs()).max(0.0))
        .fold(0.0, f64::max)
}

pub fn solve_obstacle_pdas(prob: &ObstacleProblem, q: &ControlField, opts: &SolverOptions) -> Result<OracleSolution> {
    let space = prob.space();
    q.validate(space.num_triangles(), opts.feasibility_tol)?;
    let a = space.assemble_stiffness(&q.entries)?;
    let boundary = space.mesh().boundary_mask();
    let b = prob.load();
    let psi = prob.psi();
    let n = space.num_nodes();

    let mut u = solve_spd(&a, b, &opts.linear)?.x;
    let mut lambda = vec![0.0; n];
    let mut active = vec![false; n];
    let mut history = Vec::new();
    for iteration in 1..=opts.pdas_max_iters {
        let next: Vec<bool> =
            (0..n).map(|i| !boundary[i] && lambda[i] + opts.pdas_c * (psi - u[i]) > 0.0).collect();
        if iteration > 1 && next == active {
            let violation = complementarity_violation(prob, &u, &lambda);
            return Ok(OracleSolution {
                u: StateField::from_values(u),
                lambda,
                active,
                iterations: iteration - 1,
                active_history: history,
                complementarity_violation: violation,
            });
        }
        active = next;
        history.push(active.iter().filter(|&&x| x).count());

        // Inactive rows: A_II x_I = b_I - A_IA ψ; active rows are pinned.
        let mask: Vec<bool> = (0..n).map(|i| boundary[i] || active[i]).collect();
        let pinned: Vec<f64> = (0..n).map(|i| if active[i] { psi } else { 0.0 }).collect();
        let a_pinned = a.apply(&pinned);
        let rhs: Vec<f64> = (0..n).map(|i| if mask[i] { 0.0 } else { b[i] - a_pinned[i] }).collect();
        let x = solve_spd(&a.with_mask(&mask), &rhs, &opts.linear)?.x;
        u = (0..n).map(|i| if active[i] { psi } else if boundary[i] { 0.0 } else { x[i] }).collect();

        let au = a.apply(&u);
        lambda = (0..n).map(|i| if active[i] { au[i] - b[i] } else { 0.0 }).collect();
    }
    Err(Error::Oracle { iterations: opts.pdas_max_iters, active_sizes: history })
}
