//! Adjoint equation, multipliers `λ_γ`, `μ_γ` and the limiting optimality
//! residuals of one regularized snapshot.

use crate::control::{fixed_point_residual, outer_terms, reduced_gradient, vi_residual, ControlField};
use crate::error::Result;
use crate::fem::{solve_spd, SparseOperator, StateField};
use crate::problem::{ObstacleProblem, SolverOptions};
use crate::smoothed_max::SmoothMax;
use crate::state::StateSolveReport;

/// `A(q) + M_L diag(∂r/∂u)` at `u`, the Newton Jacobian of the state equation.
pub fn adjoint_operator(prob: &ObstacleProblem, q: &ControlField, u: &[f64], m: &dyn SmoothMax) -> Result<SparseOperator> {
    let space = prob.space();
    let mut op = space.assemble_stiffness(&q.entries)?;
    let weights: Vec<f64> =
        u.iter().zip(space.lumped_mass()).map(|(&ui, w)| w * m.penalty(prob.psi(), ui).1).collect();
    op.add_diagonal(&weights);
    Ok(op)
}

/// Right-hand side `M (u - u_d)` on interior rows.
pub fn adjoint_rhs(prob: &ObstacleProblem, u: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = u.iter().zip(prob.u_d()).map(|(a, b)| a - b).collect();
    prob.space().load(&diff)
}

pub fn solve_adjoint(
    prob: &ObstacleProblem,
    q: &ControlField,
    u: &StateField,
    m: &dyn SmoothMax,
    opts: &SolverOptions,
) -> Result<StateField> {
    let op = adjoint_operator(prob, q, &u.values, m)?;
    solve_adjoint_with(prob, &op, u, opts)
}

/// Adjoint solve with a precomputed operator, e.g. the final Newton Jacobian.
pub fn solve_adjoint_with(
    prob: &ObstacleProblem,
    operator: &SparseOperator,
    u: &StateField,
    opts: &SolverOptions,
) -> Result<StateField> {
    let rhs = adjoint_rhs(prob, &u.values);
    Ok(StateField::from_values(solve_spd(operator, &rhs, &opts.linear)?.x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Multipliers {
    /// `λ_i = γ max_γ(ψ - u_i) >= 0`.
    pub lambda: Vec<f64>,
    /// `μ_i = γ max_γ'(ψ - u_i) p_i`.
    pub mu: Vec<f64>,
}

pub fn multipliers(prob: &ObstacleProblem, u: &[f64], p: &[f64], m: &dyn SmoothMax) -> Multipliers {
    let (lambda, mu) = u
        .iter()
        .zip(p)
        .map(|(&ui, &pi)| {
            let (r, dr) = m.penalty(prob.psi(), ui);
            (-r, dr * pi)
        })
        .unzip();
    Multipliers { lambda, mu }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    pub gamma: f64,
    pub objective: f64,
    /// `|(λ, ψ - u)|`.
    pub comp_state: f64,
    /// `|(λ, |p|)|`.
    pub comp_adjoint: f64,
    /// `|(μ, u - ψ)|`.
    pub comp_mu: f64,
    /// `|q - P_ad(sym(grad u ⊗ grad p) / α)|_{L^2}`.
    pub control_fixed_point_residual: f64,
    /// Projected-gradient stationarity `|q - P_ad(q - G)|_{L^2}`.
    pub vi_residual: f64,
    pub mu_l1: f64,
    pub u_minus_ud_l1: f64,
    pub lambda_min_nodal: f64,
    pub p_h1_semi: f64,
    pub r_norm_l2: f64,
    pub div_norm_l2: f64,
    pub feas_linf: f64,
    pub feas_grad_l2: f64,
    pub newton_iterations: usize,
}

pub fn kkt_report(
    prob: &ObstacleProblem,
    q: &ControlField,
    u: &[f64],
    p: &[f64],
    mult: &Multipliers,
    m: &dyn SmoothMax,
    state: &StateSolveReport,
) -> KktReport {
    let space = prob.space();
    let psi = prob.psi();
    let gap: Vec<f64> = u.iter().map(|&ui| ui - psi).collect();
    let neg_gap: Vec<f64> = gap.iter().map(|g| -g).collect();
    let abs_p: Vec<f64> = p.iter().map(|x| x.abs()).collect();
    let diff: Vec<f64> = u.iter().zip(prob.u_d()).map(|(a, b)| a - b).collect();
    let g = reduced_gradient(space, prob.alpha(), q, u, p);
    KktReport {
        gamma: m.gamma(),
        objective: prob.objective(u, &q.entries),
        comp_state: space.l2_inner(&mult.lambda, &neg_gap).abs(),
        comp_adjoint: space.l2_inner(&mult.lambda, &abs_p).abs(),
        comp_mu: space.l2_inner(&mult.mu, &gap).abs(),
        control_fixed_point_residual: fixed_point_residual(space, prob.alpha(), q, &outer_terms(space, u, p)),
        vi_residual: vi_residual(space, q, &g),
        mu_l1: space.l1_norm(&mult.mu),
        u_minus_ud_l1: space.l1_norm(&diff),
        lambda_min_nodal: mult.lambda.iter().copied().fold(f64::INFINITY, f64::min),
        p_h1_semi: space.h1_seminorm(p),
        r_norm_l2: state.r_norm_l2,
        div_norm_l2: state.div_norm_l2,
        feas_linf: state.feas_linf,
        feas_grad_l2: state.feas_grad_l2,
        newton_iterations: state.newton_iterations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuBound {
    pub mu_l1: f64,
    /// `|u - u_d|_{L^1}`.
    pub bound_rhs: f64,
    pub satisfied: bool,
}

pub fn mu_l1_bound_check(prob: &ObstacleProblem, mu: &[f64], u: &[f64], c_mu: f64) -> MuBound {
    let space = prob.space();
    let diff: Vec<f64> = u.iter().zip(prob.u_d()).map(|(a, b)| a - b).collect();
    let mu_l1 = space.l1_norm(mu);
    let bound_rhs = space.l1_norm(&diff);
    MuBound { mu_l1, bound_rhs, satisfied: mu_l1 <= c_mu * bound_rhs }
}
