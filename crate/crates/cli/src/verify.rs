//! Invariant battery behind `obstacle verify`.

use obstacle_core::adjoint::{multipliers, solve_adjoint_with};
use obstacle_core::check::PropertyCheck;
use obstacle_core::control::projection_checks;
use obstacle_core::optimize::{default_fd_steps, fd_gradient_check, random_direction};
use obstacle_core::oracle::solve_obstacle_pdas;
use obstacle_core::rates::fit_rate;
use obstacle_core::smoothed_max::certify;
use obstacle_core::state::{solve_state_ladder, LadderPoint};
use obstacle_core::ObstacleProblem;

use crate::commands::{setup, Setup};
use crate::config::RunConfig;
use crate::Failure;

const SMOOTHED_MAX_SAMPLES: usize = 10_000;
const PROJECTION_SAMPLES: usize = 10_000;
const FD_TOL: f64 = 1e-5;

/// Runs every check; a check whose computation fails is reported as FAIL
/// with a NaN measurement instead of aborting the battery.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<PropertyCheck>, Failure> {
    let Setup { prob, q0 } = setup(cfg)?;
    let family = cfg.family();
    let ladder = &cfg.path.gamma_ladder;
    let seed = cfg.path.seed;
    let mut checks = Vec::new();

    for gamma in [ladder[0], ladder[ladder.len() - 1]] {
        match family.at(gamma) {
            Ok(m) => checks.extend(certify(m.as_ref(), SMOOTHED_MAX_SAMPLES, seed).checks().into_iter().map(|mut c| {
                c.name = format!("{}[gamma={gamma:e}]", c.name);
                c
            })),
            Err(e) => {
                log::error!("{e}");
                checks.push(PropertyCheck::failed(format!("smoothed_max[gamma={gamma:e}]"), 0.0));
            }
        }
    }

    checks.extend(projection_checks(PROJECTION_SAMPLES, seed));

    let gamma = cfg.regularization.gamma;
    for k in 0..cfg.path.fd_directions as u64 {
        let name = format!("fd_gradient.direction{k}");
        let d = random_direction(prob.space(), seed.wrapping_add(k));
        let res = family
            .at(gamma)
            .and_then(|m| fd_gradient_check(&prob, m.as_ref(), &q0, &d, &default_fd_steps(), &cfg.solver_options()));
        checks.push(match res {
            Ok(fd) => PropertyCheck::at_most(name, fd.best_rel_error, FD_TOL),
            Err(e) => {
                log::error!("{name}: {e}");
                PropertyCheck::failed(name, FD_TOL)
            }
        });
    }

    let opts = cfg.solver_options();
    match solve_state_ladder(&prob, &q0, family.as_ref(), ladder, true, &opts) {
        Ok(points) => {
            checks.extend(ladder_checks(cfg, &prob, &points));
            checks.extend(oracle_checks(cfg, &prob, &q0, &points));
        }
        Err(e) => {
            log::error!("state ladder: {e}");
            checks.push(PropertyCheck::failed("bound.state_ladder", 0.0));
        }
    }
    Ok(checks)
}

fn ladder_checks(cfg: &RunConfig, prob: &ObstacleProblem, points: &[LadderPoint]) -> Vec<PropertyCheck> {
    let f = prob.f_l2();
    let bound = 1.0 + 1e-6;
    let ratio = |v: f64| if f > 0.0 { v / f } else if v == 0.0 { 0.0 } else { f64::INFINITY };
    let worst = |g: fn(&LadderPoint) -> f64| points.iter().map(g).fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![
        PropertyCheck::at_most("bound.r_norm_over_f", ratio(worst(|p| p.solution.report.r_norm_l2)), bound),
        PropertyCheck::at_most("bound.div_norm_over_f", ratio(worst(|p| p.solution.report.div_norm_l2)), bound),
    ];

    let opts = cfg.solver_options();
    let mut mu_ratio = f64::NEG_INFINITY;
    let mut lambda_min = f64::INFINITY;
    for p in points {
        let Ok(m) = cfg.family().at(p.gamma) else { continue };
        let u = &p.solution.u;
        match solve_adjoint_with(prob, &p.solution.jacobian, u, &opts) {
            Ok(adj) => {
                let mult = multipliers(prob, &u.values, &adj.values, m.as_ref());
                let b = obstacle_core::adjoint::mu_l1_bound_check(prob, &mult.mu, &u.values, cfg.tolerances.c_mu);
                let r = if b.mu_l1 == 0.0 { 0.0 } else { b.mu_l1 / (cfg.tolerances.c_mu * b.bound_rhs) };
                mu_ratio = mu_ratio.max(r);
                lambda_min = mult.lambda.iter().copied().fold(lambda_min, f64::min);
            }
            Err(e) => {
                log::error!("adjoint at gamma {:e}: {e}", p.gamma);
                mu_ratio = f64::NAN;
            }
        }
    }
    out.push(PropertyCheck::at_most("bound.mu_l1_over_c_mu_rhs", mu_ratio, 1.0));
    out.push(PropertyCheck::at_least("bound.lambda_min", lambda_min, -1e-12));

    let gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    let floor = opts.saturation_floor();
    let slope = |g: fn(&LadderPoint) -> f64| {
        let v: Vec<f64> = points.iter().map(g).collect();
        fit_rate(&gammas, &v, floor).map_or(f64::NAN, |f| f.slope)
    };
    let s_linf = slope(|p| p.solution.report.feas_linf);
    let s_grad = slope(|p| p.solution.report.feas_grad_l2);
    out.extend([
        PropertyCheck::at_most("rate.feas_linf_max", s_linf, -0.8),
        PropertyCheck::at_least("rate.feas_linf_min", s_linf, -1.3),
        PropertyCheck::at_most("rate.feas_grad_max", s_grad, -0.35),
        PropertyCheck::at_least("rate.feas_grad_min", s_grad, -0.75),
    ]);
    out
}

fn oracle_checks(
    cfg: &RunConfig,
    prob: &ObstacleProblem,
    q: &obstacle_core::ControlField,
    points: &[LadderPoint],
) -> Vec<PropertyCheck> {
    let opts = cfg.solver_options();
    let oracle = match solve_obstacle_pdas(prob, q, &opts) {
        Ok(o) => o,
        Err(e) => {
            log::error!("oracle: {e}");
            return vec![PropertyCheck::failed("oracle.pdas", 0.0)];
        }
    };
    let space = prob.space();
    let errors: Vec<f64> = points
        .iter()
        .map(|p| {
            let d: Vec<f64> = p.solution.u.values.iter().zip(&oracle.u.values).map(|(a, b)| a - b).collect();
            space.h1_seminorm(&d)
        })
        .collect();
    // Largest step-to-step change of the H1 error; must not be positive.
    let worst_change = errors.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    vec![
        PropertyCheck::at_most("oracle.complementarity", oracle.complementarity_violation, opts.comp_tol),
        PropertyCheck::at_most("oracle.h1_error_change", worst_change, 0.0),
    ]
}
