mod common;

use common::*;
use obstacle_core::fem::StateField;
use obstacle_core::oracle::solve_obstacle_pdas;
use obstacle_core::state::{feasibility_diagnostics, solve_regularized_state, solve_state_ladder};
use obstacle_core::{ControlField, Error, PolynomialFamily, PolynomialMax, Sym2};

fn zeros(prob: &obstacle_core::ObstacleProblem) -> StateField {
    StateField::zeros(prob.space().num_nodes())
}

#[test]
fn zero_load_gives_zero_state() {
    let prob = problem(8, -1.0, 0.0, 0.0, 1.0);
    for gamma in [1.0, 1e2, 1e4] {
        let m = PolynomialMax::new(gamma).unwrap();
        let sol = solve_regularized_state(&prob, &scalar(&prob, 1.7), &m, &zeros(&prob), &opts()).unwrap();
        assert!(sol.u.values.iter().all(|&v| v == 0.0));
        assert_eq!(sol.report.newton_iterations, 0);
    }
}

#[test]
fn single_node_inactive() {
    let prob = problem(2, -1.0, -1.0, 0.0, 1.0);
    let m = PolynomialMax::new(1e4).unwrap();
    let sol = solve_regularized_state(&prob, &identity(&prob), &m, &zeros(&prob), &opts()).unwrap();
    assert!((sol.u.values[CENTER] + 0.0625).abs() < 1e-12, "{}", sol.u.values[CENTER]);
}

#[test]
fn single_node_active() {
    let gamma = 1e4;
    let prob = problem(2, -0.03, -1.0, 0.0, 1.0);
    let m = PolynomialMax::new(gamma).unwrap();
    let u = solve_regularized_state(&prob, &identity(&prob), &m, &zeros(&prob), &opts()).unwrap().u.values[CENTER];
    let slack = 1e-5;
    assert!(u >= -0.03 - 1.0 / (2.0 * gamma) - slack && u <= -0.03 + slack, "{u}");
}

#[test]
fn newton_residual_decreases_monotonically() {
    let prob = reference(16);
    let m = PolynomialMax::new(1e4).unwrap();
    let sol = solve_regularized_state(&prob, &scalar(&prob, 1.25), &m, &zeros(&prob), &opts()).unwrap();
    let h = &sol.report.residual_history;
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    assert!(sol.report.final_residual_norm <= opts().newton_tol);
}

#[test]
fn infeasible_control_rejected() {
    let prob = reference(4);
    let m = PolynomialMax::new(10.0).unwrap();
    let q = ControlField::constant(prob.space().num_triangles(), Sym2::new(3.0, 1.0, 0.0), prob.bounds());
    let err = solve_regularized_state(&prob, &q, &m, &zeros(&prob), &opts()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
}

#[test]
fn newton_cap_reports_history() {
    let prob = reference(8);
    let m = PolynomialMax::new(1e4).unwrap();
    let opts = obstacle_core::SolverOptions { newton_max_iters: 1, ..opts() };
    match solve_regularized_state(&prob, &scalar(&prob, 1.25), &m, &zeros(&prob), &opts) {
        Err(Error::Newton { iterations, history }) => {
            assert_eq!(iterations, 1);
            assert_eq!(history.len(), 2);
        }
        other => panic!("expected Newton failure, got {other:?}"),
    }
}

#[test]
fn feasibility_of_constant_violation() {
    let space = space(4);
    let gamma = 250.0;
    let psi = -0.05;
    let u = vec![psi - 1.0 / gamma; space.num_nodes()];
    let rep = feasibility_diagnostics(&space, psi, &u, &[2.0]).unwrap();
    assert!((rep.linf - 1.0 / gamma).abs() < 1e-15);
    assert!(rep.grad_l2.abs() < 1e-15);
    assert!((rep.ls[0].1 - 1.0 / gamma).abs() < 1e-14);

    let above = vec![psi + 0.01; space.num_nodes()];
    let rep = feasibility_diagnostics(&space, psi, &above, &[2.0, 4.0]).unwrap();
    assert_eq!((rep.linf, rep.grad_l2, rep.ls[0].1, rep.ls[1].1), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn feasibility_decade_ratio_on_reference() {
    let prob = reference(32);
    let q = scalar(&prob, 1.25);
    let pts = solve_state_ladder(&prob, &q, &PolynomialFamily, &[100.0, 1000.0], true, &opts()).unwrap();
    let ratio = pts[0].solution.report.feas_linf / pts[1].solution.report.feas_linf;
    assert!((8.0..=12.5).contains(&ratio), "{ratio}");
}

#[test]
fn warm_ladder_needs_no_more_newton_steps_than_cold() {
    let prob = reference(32);
    let q = scalar(&prob, 1.25);
    let ladder = obstacle_core::optimize::default_ladder();
    let warm = solve_state_ladder(&prob, &q, &PolynomialFamily, &ladder, true, &opts()).unwrap();
    let cold = solve_state_ladder(&prob, &q, &PolynomialFamily, &ladder, false, &opts()).unwrap();
    for (w, c) in warm.iter().zip(&cold).skip(1) {
        assert!(
            w.solution.report.newton_iterations <= c.solution.report.newton_iterations,
            "gamma {}: warm {} cold {}",
            w.gamma,
            w.solution.report.newton_iterations,
            c.solution.report.newton_iterations
        );
    }
}

#[test]
fn pdas_zero_load() {
    let prob = problem(8, -1.0, 0.0, 0.0, 1.0);
    let sol = solve_obstacle_pdas(&prob, &identity(&prob), &opts()).unwrap();
    assert!(sol.u.values.iter().all(|&v| v == 0.0));
    assert!(sol.lambda.iter().all(|&v| v == 0.0));
    assert_eq!(sol.active_count(), 0);
}

#[test]
fn pdas_single_node_active() {
    let prob = problem(2, -0.03, -1.0, 0.0, 1.0);
    let sol = solve_obstacle_pdas(&prob, &identity(&prob), &opts()).unwrap();
    assert_eq!(sol.u.values[CENTER], -0.03);
    assert!((sol.lambda[CENTER] - 0.13).abs() < 1e-14, "{}", sol.lambda[CENTER]);
    assert_eq!(sol.complementarity_violation, 0.0);
}

#[test]
fn pdas_single_node_inactive() {
    let prob = problem(2, -0.1, -1.0, 0.0, 1.0);
    let sol = solve_obstacle_pdas(&prob, &identity(&prob), &opts()).unwrap();
    assert!((sol.u.values[CENTER] + 0.0625).abs() < 1e-14);
    assert_eq!(sol.lambda[CENTER], 0.0);
}

#[test]
fn pdas_complementarity_is_exact_on_reference() {
    let prob = reference(32);
    let sol = solve_obstacle_pdas(&prob, &scalar(&prob, 1.25), &opts()).unwrap();
    let psi = prob.psi();
    for &i in prob.space().mesh().interior_nodes() {
        let (u, l) = (sol.u.values[i], sol.lambda[i]);
        assert!(u >= psi);
        assert!((u > psi && l == 0.0) || (u == psi && l >= -opts().comp_tol), "node {i}: u {u} lambda {l}");
    }
    assert!(sol.active_count() > 0);
}

#[test]
fn pdas_cap_reports_active_sets() {
    let prob = reference(32);
    let opts = obstacle_core::SolverOptions { pdas_max_iters: 1, ..opts() };
    let err = solve_obstacle_pdas(&prob, &scalar(&prob, 1.25), &opts).unwrap_err();
    assert!(matches!(err, Error::Oracle { iterations: 1, .. }), "{err}");
}
