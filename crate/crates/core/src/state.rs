//! Regularized state equation `-div(q grad u) + r(γ; u) = f` solved by
//! damped Newton.
//!
//! The penalty term is integrated with the lumped mass matrix, so the
//! discrete residual is `A(q) u + M_L r(u) - M f` and its Jacobian
//! `A(q) + M_L diag(∂r/∂u)` is symmetric positive definite.

use crate::control::{ControlField, Sym2};
use crate::error::{invalid, Error, Result};
use crate::fem::{solve_spd, FemSpace, SparseOperator, StateField};
use crate::par;
use crate::problem::{ObstacleProblem, SolverOptions};
use crate::smoothed_max::{MaxFamily, SmoothMax};

#[derive(Clone, Debug, PartialEq)]
pub struct StateSolveReport {
    pub newton_iterations: usize,
    pub final_residual_norm: f64,
    pub damping_events: usize,
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
    /// `|r(γ; u)|_{L^2}`.
    pub r_norm_l2: f64,
    /// `|M_L^{-1} A(q) u|_{L^2}`, the discrete `|div(q grad u)|` surrogate.
    pub div_norm_l2: f64,
    /// `|max(ψ - u, 0)|_∞` over nodes.
    pub feas_linf: f64,
    /// `|grad max(ψ - u, 0)|_{L^2}` of the nodal interpolant.
    pub feas_grad_l2: f64,
    /// `max_i u_i` when `f ≤ 0`; positive values above 1e-10 break the
    /// discrete comparison principle and are logged as warnings.
    pub comparison_max: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct StateSolution {
    pub u: StateField,
    pub report: StateSolveReport,
    /// Newton Jacobian at the returned state; reused by the adjoint solve.
    pub jacobian: SparseOperator,
}

/// Residual and `∂r/∂u` weights (lumped) at `u`.
struct Residual {
    value: Vec<f64>,
    dr_weighted: Vec<f64>,
    norm: f64,
}

fn residual(prob: &ObstacleProblem, a: &SparseOperator, m: &dyn SmoothMax, u: &[f64]) -> Residual {
    let space = prob.space();
    let lumped = space.lumped_mass();
    let load = prob.load();
    let psi = prob.psi();
    let au = a.apply(u);
    let pairs = par::map_range(u.len(), |i| {
        if a.is_masked(i) {
            (au[i], 0.0)
        } else {
            let (r, dr) = m.penalty(psi, u[i]);
            (au[i] + lumped[i] * r - load[i], lumped[i] * dr)
        }
    });
    let (value, dr_weighted): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let norm = space.interior_norm(&value);
    Residual { value, dr_weighted, norm }
}

/// Validates `q` against the admissible set, then solves the state equation.
pub fn solve_regularized_state(
    prob: &ObstacleProblem,
    q: &ControlField,
    m: &dyn SmoothMax,
    initial_guess: &StateField,
    opts: &SolverOptions,
) -> Result<StateSolution> {
    q.validate(prob.space().num_triangles(), opts.feasibility_tol)?;
    solve_state_with_coefficient(prob, &q.entries, m, initial_guess, opts)
}

/// Solves the state equation for any uniformly positive definite
/// coefficient, admissible or not. Used by derivative checks that perturb
/// controls sitting on the boundary of the admissible set.
pub fn solve_state_with_coefficient(
    prob: &ObstacleProblem,
    q: &[Sym2],
    m: &dyn SmoothMax,
    initial_guess: &StateField,
    opts: &SolverOptions,
) -> Result<StateSolution> {
    let space = prob.space();
    initial_guess.check_boundary(space.mesh())?;
    if let Some(t) = q.iter().position(|e| !(e.eigenvalues().0 > 0.0)) {
        return Err(invalid(format!("coefficient on triangle {t} is not positive definite")));
    }
    let a = space.assemble_stiffness(q)?;

    let mut u = initial_guess.values.clone();
    let mut res = residual(prob, &a, m, &u);
    let mut history = vec![res.norm];
    let (mut iterations, mut damping, mut linear_iterations) = (0, 0, 0);
    while res.norm > opts.newton_tol {
        if iterations == opts.newton_max_iters {
            return Err(Error::Newton { iterations, history });
        }
        let mut jac = a.clone();
        jac.add_diagonal(&res.dr_weighted);
        let rhs: Vec<f64> = res.value.iter().map(|v| -v).collect();
        let step = solve_spd(&jac, &rhs, &opts.linear)?;
        linear_iterations += step.iterations;

        let mut t = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step.x).map(|(ui, di)| ui + t * di).collect();
            let trial_res = residual(prob, &a, m, &trial);
            if trial_res.norm < res.norm {
                u = trial;
                res = trial_res;
                break;
            }
            if halvings == opts.max_halvings {
                history.push(trial_res.norm);
                return Err(Error::Newton { iterations: iterations + 1, history });
            }
            t *= 0.5;
            halvings += 1;
            damping += 1;
        }
        iterations += 1;
        history.push(res.norm);
    }

    let mut jacobian = a.clone();
    jacobian.add_diagonal(&res.dr_weighted);
    let report = build_report(prob, &a, m, &u, iterations, damping, linear_iterations, history);
    Ok(StateSolution { u: StateField::from_values(u), report, jacobian })
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    prob: &ObstacleProblem,
    a: &SparseOperator,
    m: &dyn SmoothMax,
    u: &[f64],
    iterations: usize,
    damping: usize,
    linear_iterations: usize,
    history: Vec<f64>,
) -> StateSolveReport {
    let space = prob.space();
    let r: Vec<f64> = u.iter().map(|&ui| m.penalty(prob.psi(), ui).0).collect();
    let au = a.apply(u);
    let mut div: Vec<f64> = au.iter().zip(space.lumped_mass()).map(|(v, w)| v / w).collect();
    space.zero_boundary(&mut div);
    let feas = feasibility_diagnostics(space, prob.psi(), u, &[]).expect("no exponents requested");
    let comparison_max = prob.f_is_nonpositive().then(|| u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    if let Some(mx) = comparison_max.filter(|&mx| mx > 1e-10) {
        log::warn!("regularized state exceeds 0 by {mx:e} although f <= 0");
    }
    StateSolveReport {
        newton_iterations: iterations,
        final_residual_norm: *history.last().expect("history starts non-empty"),
        damping_events: damping,
        residual_history: history,
        linear_iterations,
        r_norm_l2: space.l2_norm(&r),
        div_norm_l2: space.l2_norm(&div),
        feas_linf: feas.linf,
        feas_grad_l2: feas.grad_l2,
        comparison_max,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub linf: f64,
    pub grad_l2: f64,
    /// `(s, |max(ψ - u, 0)|_{L^s})` for each requested exponent.
    pub ls: Vec<(f64, f64)>,
}

/// Norms of the nodal interpolant of `max(ψ - u, 0)`.
pub fn feasibility_diagnostics(space: &FemSpace, psi: f64, u: &[f64], exponents: &[f64]) -> Result<FeasibilityReport> {
    let v: Vec<f64> = u.iter().map(|&ui| (psi - ui).max(0.0)).collect();
    let ls = exponents.iter().map(|&s| Ok((s, space.ls_norm(&v, s)?))).collect::<Result<_>>()?;
    Ok(FeasibilityReport { linf: space.linf_norm(&v), grad_l2: space.h1_seminorm(&v), ls })
}

#[derive(Clone, Debug)]
pub struct LadderPoint {
    pub gamma: f64,
    pub solution: StateSolution,
}

/// Solves the state equation for fixed `q` over a γ ladder. Warm mode
/// continues from the previous state; cold mode starts every solve at zero
/// and runs them concurrently.
pub fn solve_state_ladder(
    prob: &ObstacleProblem,
    q: &ControlField,
    family: &dyn MaxFamily,
    gammas: &[f64],
    warm: bool,
    opts: &SolverOptions,
) -> Result<Vec<LadderPoint>> {
    let zero = StateField::zeros(prob.space().num_nodes());
    if warm {
        let mut out: Vec<LadderPoint> = Vec::with_capacity(gammas.len());
        for &gamma in gammas {
            let m = family.at(gamma)?;
            let guess = out.last().map_or(&zero, |p| &p.solution.u);
            let solution = solve_regularized_state(prob, q, m.as_ref(), guess, opts)?;
            out.push(LadderPoint { gamma, solution });
        }
        Ok(out)
    } else {
        par::map_jobs(gammas, |&gamma| {
            let m = family.at(gamma)?;
            let solution = solve_regularized_state(prob, q, m.as_ref(), &zero, opts)?;
            Ok(LadderPoint { gamma, solution })
        })
        .into_iter()
        .collect()
    }
}
