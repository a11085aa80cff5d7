mod common;

use common::*;
use obstacle_core::adjoint::{kkt_report, mu_l1_bound_check, multipliers, solve_adjoint, solve_adjoint_with, Multipliers};
use obstacle_core::fem::{dot, solve_spd, StateField};
use obstacle_core::state::{solve_state_ladder, StateSolveReport};
use obstacle_core::{PolynomialFamily, PolynomialMax};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn empty_report() -> StateSolveReport {
    StateSolveReport {
        newton_iterations: 0,
        final_residual_norm: 0.0,
        damping_events: 0,
        residual_history: vec![0.0],
        linear_iterations: 0,
        r_norm_l2: 0.0,
        div_norm_l2: 0.0,
        feas_linf: 0.0,
        feas_grad_l2: 0.0,
        comparison_max: None,
    }
}

#[test]
fn adjoint_vanishes_when_state_matches_target() {
    let prob = problem(8, -1.0, 0.0, 0.0, 1.0);
    let m = PolynomialMax::new(100.0).unwrap();
    let u = StateField::zeros(prob.space().num_nodes());
    let p = solve_adjoint(&prob, &scalar(&prob, 1.0), &u, &m, &opts()).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.0));
}

#[test]
fn adjoint_single_node() {
    let prob = problem(2, -1.0, 0.0, -1.0, 1.0);
    let m = PolynomialMax::new(1e4).unwrap();
    let u = StateField::zeros(prob.space().num_nodes());
    let p = solve_adjoint(&prob, &identity(&prob), &u, &m, &opts()).unwrap();
    assert!((p.values[CENTER] - 0.0625).abs() < 1e-14, "{}", p.values[CENTER]);
}

#[test]
fn adjoint_reduces_to_diffusion_when_inactive() {
    let prob = problem(16, -1.0, 0.0, -0.3, 1.0);
    let m = PolynomialMax::new(1e3).unwrap();
    let q = scalar(&prob, 1.5);
    let u = StateField::zeros(prob.space().num_nodes());
    let p = solve_adjoint(&prob, &q, &u, &m, &opts()).unwrap();
    let a = prob.space().assemble_stiffness(&q.entries).unwrap();
    let rhs = prob.space().load(&vec![0.3; prob.space().num_nodes()]);
    let plain = solve_spd(&a, &rhs, &opts().linear).unwrap().x;
    let diff = p.values.iter().zip(&plain).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn adjoint_operator_is_self_adjoint() {
    let prob = reference(32);
    let m = PolynomialMax::new(1e3).unwrap();
    let q = scalar(&prob, 1.25);
    let sol = obstacle_core::state::solve_regularized_state(
        &prob,
        &q,
        &m,
        &StateField::zeros(prob.space().num_nodes()),
        &opts(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut draw = || {
        let mut v: Vec<f64> = (0..prob.space().num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prob.space().zero_boundary(&mut v);
        v
    };
    let (b, c) = (draw(), draw());
    let xb = solve_spd(&sol.jacobian, &b, &opts().linear).unwrap().x;
    let xc = solve_spd(&sol.jacobian, &c, &opts().linear).unwrap().x;
    let (lhs, rhs) = (dot(&xb, &c), dot(&xc, &b));
    assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
}

#[test]
fn multiplier_examples() {
    let prob = problem(2, -1.0, -1.0, 0.0, 1.0);
    let n = prob.space().num_nodes();

    let inactive = vec![-0.5; n];
    let mult = multipliers(&prob, &inactive, &vec![3.0; n], &PolynomialMax::new(10.0).unwrap());
    assert!(mult.lambda.iter().chain(&mult.mu).all(|&v| v == 0.0));

    let mut u = vec![0.0; n];
    u[CENTER] = -2.0;
    let mult = multipliers(&prob, &u, &vec![0.0; n], &PolynomialMax::new(10.0).unwrap());
    assert_eq!(mult.lambda[CENTER], 10.0);

    u[CENTER] = -1.5;
    let mult = multipliers(&prob, &u, &vec![2.0; n], &PolynomialMax::new(1.0).unwrap());
    assert!((mult.mu[CENTER] - 2.0).abs() < 1e-14, "{}", mult.mu[CENTER]);
}

proptest! {
    #[test]
    fn multiplier_sign_and_support(
        u in proptest::collection::vec(-0.2f64..0.1, 9),
        p in proptest::collection::vec(-5.0f64..5.0, 9),
        log_gamma in 0.0f64..5.0,
    ) {
        let prob = problem(2, -0.05, -1.0, 0.0, 1.0);
        let m = PolynomialMax::new(10f64.powf(log_gamma)).unwrap();
        let mult = multipliers(&prob, &u, &p, &m);
        for (i, &ui) in u.iter().enumerate() {
            prop_assert!(mult.lambda[i] >= 0.0);
            if prob.psi() - ui <= 0.0 {
                prop_assert_eq!(mult.mu[i], 0.0);
                prop_assert_eq!(mult.lambda[i], 0.0);
            }
        }
    }
}

#[test]
fn kkt_vanishes_at_trivial_point() {
    let prob = problem(8, -1.0, 0.0, 0.0, 1.0);
    let n = prob.space().num_nodes();
    let m = PolynomialMax::new(100.0).unwrap();
    let q = scalar(&prob, prob.bounds().q_min());
    let (u, p) = (vec![0.0; n], vec![0.0; n]);
    let mult = multipliers(&prob, &u, &p, &m);
    let k = kkt_report(&prob, &q, &u, &p, &mult, &m, &empty_report());
    assert_eq!((k.comp_state, k.comp_adjoint, k.comp_mu), (0.0, 0.0, 0.0));
    assert!(k.control_fixed_point_residual < 1e-15);
    assert!(k.vi_residual < 1e-15);
}

#[test]
fn kkt_constant_pairing() {
    let prob = problem(8, -0.05, -1.0, 0.0, 1.0);
    let n = prob.space().num_nodes();
    let m = PolynomialMax::new(100.0).unwrap();
    let u = vec![prob.psi() + 1.0; n];
    let mult = Multipliers { lambda: vec![1.0; n], mu: vec![0.0; n] };
    let k = kkt_report(&prob, &scalar(&prob, 1.0), &u, &vec![0.0; n], &mult, &m, &empty_report());
    assert!((k.comp_state - 1.0).abs() < 1e-13, "{}", k.comp_state);
}

#[test]
fn mu_bound_examples() {
    let prob = problem(4, -0.05, -1.0, -0.02, 1.0);
    let n = prob.space().num_nodes();
    let u: Vec<f64> = (0..n).map(|i| -0.01 * (i % 3) as f64).collect();
    let b = mu_l1_bound_check(&prob, &vec![0.0; n], &u, 10.0);
    assert!(b.satisfied && b.mu_l1 == 0.0);

    let ud = vec![-0.02; n];
    let b = mu_l1_bound_check(&prob, &vec![1e-9; n], &ud, 10.0);
    assert_eq!(b.bound_rhs, 0.0);
    assert!(!b.satisfied);
}

#[test]
fn reference_ladder_trends() {
    let prob = reference(32);
    let q = scalar(&prob, 1.25);
    let ladder = [10.0, 100.0, 1000.0, 10000.0];
    let pts = solve_state_ladder(&prob, &q, &PolynomialFamily, &ladder, true, &opts()).unwrap();
    let mut comp = Vec::new();
    let mut mu_l1 = Vec::new();
    for pt in &pts {
        let m = PolynomialMax::new(pt.gamma).unwrap();
        let p = solve_adjoint_with(&prob, &pt.solution.jacobian, &pt.solution.u, &opts()).unwrap();
        let mult = multipliers(&prob, &pt.solution.u.values, &p.values, &m);
        let k = kkt_report(&prob, &q, &pt.solution.u.values, &p.values, &mult, &m, &pt.solution.report);
        let b = mu_l1_bound_check(&prob, &mult.mu, &pt.solution.u.values, 10.0);
        assert!(b.satisfied, "gamma {}: {b:?}", pt.gamma);
        comp.push(k.comp_state);
        mu_l1.push(b.mu_l1);
    }
    assert!(comp[2] < comp[1], "{comp:?}");
    let (lo, hi) = mu_l1.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 10.0, "{mu_l1:?}");
}
