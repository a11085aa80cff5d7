use std::cell::RefCell;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use obstacle_core::adjoint::{mu_l1_bound_check, multipliers, KktReport};
use obstacle_core::fem::{format_f64, write_field};
use obstacle_core::optimize::{
    default_fd_steps, fd_gradient_check, optimize_fixed_gamma, random_direction, run_path_with, FdCheck,
    FixedGammaResult, PathRecord, PathSlopes,
};
use obstacle_core::oracle::solve_obstacle_pdas;
use obstacle_core::rates::fit_rate;
use obstacle_core::state::solve_regularized_state;
use obstacle_core::{ObstacleProblem, StateField};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Failure;

pub const CSV_COLUMNS: [&str; 13] = [
    "gamma",
    "J",
    "feas_Linf",
    "feas_grad_L2",
    "r_norm",
    "div_norm",
    "comp_state",
    "comp_adjoint",
    "comp_mu",
    "fixed_point_residual",
    "mu_L1",
    "newton_iters",
    "pg_iters",
];

/// Problem setup; every failure here is a configuration error.
pub(crate) struct Setup {
    pub prob: ObstacleProblem,
    pub q0: obstacle_core::ControlField,
}

pub(crate) fn setup(cfg: &RunConfig) -> Result<Setup, Failure> {
    let prob = cfg.problem().map_err(Failure::Config)?;
    let q0 = cfg.control(&prob).map_err(Failure::Config)?;
    Ok(Setup { prob, q0 })
}

fn output(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Solver(err.into().context("cannot write output"))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(Failure::Solver)
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).map_err(output)?;
    text.push('\n');
    fs::write(path, text).with_context(|| path.display().to_string()).map_err(Failure::Solver)
}

fn center_node(prob: &ObstacleProblem) -> usize {
    prob.space().mesh().nearest_node([0.5, 0.5])
}

pub fn cmd_solve_state(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    let Setup { prob, q0 } = setup(cfg)?;
    let m = cfg.family().at(cfg.regularization.gamma).map_err(|e| Failure::Config(e.into()))?;
    let zero = StateField::zeros(prob.space().num_nodes());
    let sol = solve_regularized_state(&prob, &q0, m.as_ref(), &zero, &cfg.solver_options()).map_err(Failure::core)?;
    let r = &sol.report;
    let report = json!({
        "gamma": cfg.regularization.gamma,
        "newton_iterations": r.newton_iterations,
        "final_residual_norm": r.final_residual_norm,
        "damping_events": r.damping_events,
        "residual_history": r.residual_history,
        "linear_iterations": r.linear_iterations,
        "r_norm_L2": r.r_norm_l2,
        "div_norm_L2": r.div_norm_l2,
        "f_L2": prob.f_l2(),
        "feas_Linf": r.feas_linf,
        "feas_grad_L2": r.feas_grad_l2,
        "comparison_max": r.comparison_max,
        "u_center": sol.u.values[center_node(&prob)],
        "norm_note": "bounds use |f|_{L^2} in place of |f|_{H^-1}",
    });
    ensure_dir(out)?;
    write_field(out.join("u.field"), &sol.u.values).map_err(output)?;
    write_json(&out.join("state_report.json"), &report)?;
    Ok(report)
}

pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    let Setup { prob, q0 } = setup(cfg)?;
    let sol = solve_obstacle_pdas(&prob, &q0, &cfg.solver_options()).map_err(Failure::core)?;
    let c = center_node(&prob);
    let report = json!({
        "iterations": sol.iterations,
        "active_count": sol.active_count(),
        "active_history": sol.active_history,
        "complementarity_max_violation": sol.complementarity_violation,
        "u_center": sol.u.values[c],
        "lambda_center": sol.lambda[c],
    });
    ensure_dir(out)?;
    write_field(out.join("u_oracle.field"), &sol.u.values).map_err(output)?;
    write_field(out.join("lambda.field"), &sol.lambda).map_err(output)?;
    write_json(&out.join("oracle_report.json"), &report)?;
    Ok(report)
}

fn kkt_json(k: &KktReport) -> Value {
    json!({
        "gamma": k.gamma,
        "J": k.objective,
        "comp_state": k.comp_state,
        "comp_adjoint": k.comp_adjoint,
        "comp_mu": k.comp_mu,
        "fixed_point_residual": k.control_fixed_point_residual,
        "vi_residual": k.vi_residual,
        "mu_L1": k.mu_l1,
        "u_minus_ud_L1": k.u_minus_ud_l1,
        "lambda_min_nodal": k.lambda_min_nodal,
        "p_H1_semi": k.p_h1_semi,
        "r_norm": k.r_norm_l2,
        "div_norm": k.div_norm_l2,
        "feas_Linf": k.feas_linf,
        "feas_grad_L2": k.feas_grad_l2,
        "newton_iters": k.newton_iterations,
    })
}

fn fd_json(fd: &FdCheck) -> Value {
    json!({
        "best_rel_error": fd.best_rel_error,
        "analytic": fd.analytic,
        "degenerate": fd.degenerate,
        "table": fd.table.iter().map(|r| json!([r.h, r.finite_difference, r.rel_error])).collect::<Vec<_>>(),
    })
}

fn run_fd(cfg: &RunConfig, prob: &ObstacleProblem, res: &FixedGammaResult) -> Result<Vec<Value>, Failure> {
    let m = cfg.family().at(res.gamma).map_err(Failure::core)?;
    (0..cfg.path.fd_directions as u64)
        .map(|k| {
            let d = random_direction(prob.space(), cfg.path.seed.wrapping_add(k));
            let fd = fd_gradient_check(prob, m.as_ref(), &res.q, &d, &default_fd_steps(), &cfg.solver_options())
                .map_err(Failure::core)?;
            Ok(fd_json(&fd))
        })
        .collect()
}

fn result_json(cfg: &RunConfig, prob: &ObstacleProblem, res: &FixedGammaResult) -> Result<Value, Failure> {
    let m = cfg.family().at(res.gamma).map_err(Failure::core)?;
    let mult = multipliers(prob, &res.u.values, &res.p.values, m.as_ref());
    let bound = mu_l1_bound_check(prob, &mult.mu, &res.u.values, cfg.tolerances.c_mu);
    let fd = if cfg.path.fd_check { Value::Array(run_fd(cfg, prob, res)?) } else { Value::Null };
    Ok(json!({
        "gamma": res.gamma,
        "status": format!("{:?}", res.status),
        "pg_iters": res.iterations,
        "accelerated_steps": res.accelerated_steps,
        "kkt": kkt_json(&res.kkt),
        "mu_bound": { "mu_L1": bound.mu_l1, "bound_rhs": bound.bound_rhs, "c_mu": cfg.tolerances.c_mu, "satisfied": bound.satisfied },
        "fd_check": fd,
    }))
}

fn write_snapshot(dir: &Path, res: &FixedGammaResult) -> Result<(), Failure> {
    ensure_dir(dir)?;
    res.q.write(dir.join("q.control")).map_err(output)?;
    write_field(dir.join("u.field"), &res.u.values).map_err(output)?;
    write_field(dir.join("p.field"), &res.p.values).map_err(output)
}

pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> Result<Value, Failure> {
    let Setup { prob, q0 } = setup(cfg)?;
    let m = cfg.family().at(cfg.regularization.gamma).map_err(|e| Failure::Config(e.into()))?;
    let res = optimize_fixed_gamma(&prob, m.as_ref(), &q0, None, &cfg.path_config(), &cfg.solver_options())
        .map_err(Failure::core)?;
    let report = result_json(cfg, &prob, &res)?;
    write_snapshot(out, &res)?;
    write_json(&out.join("optimize_report.json"), &report)?;
    Ok(report)
}

pub fn csv_row(r: &PathRecord) -> Vec<String> {
    let k = &r.result.kkt;
    let mut row: Vec<String> = [
        r.gamma,
        k.objective,
        k.feas_linf,
        k.feas_grad_l2,
        k.r_norm_l2,
        k.div_norm_l2,
        k.comp_state,
        k.comp_adjoint,
        k.comp_mu,
        k.control_fixed_point_residual,
        k.mu_l1,
    ]
    .iter()
    .map(|v| format_f64(*v))
    .collect();
    row.push(k.newton_iterations.to_string());
    row.push(r.result.iterations.to_string());
    row
}

fn slopes_json(s: &PathSlopes, floor: f64) -> Value {
    json!({
        "slope_feas_Linf": s.slope_feas_linf,
        "slope_feas_grad": s.slope_feas_grad,
        "slope_comp_state": s.slope_comp_state,
        "saturation_floor": floor,
        "note": "computed points are stationary points of the regularized problems, not certified global minimizers",
    })
}

/// Runs the continuation. `path.csv` and the snapshots are written as each
/// γ finishes, so an aborted path leaves the completed prefix on disk.
pub fn cmd_path(cfg: &RunConfig, out: &Path, emit_plot_data: bool) -> Result<Value, Failure> {
    let Setup { prob, q0 } = setup(cfg)?;
    let family = cfg.family();
    let opts = cfg.solver_options();
    ensure_dir(out)?;
    let mut writer = csv::Writer::from_path(out.join("path.csv")).map_err(output)?;
    writer.write_record(CSV_COLUMNS).map_err(output)?;
    writer.flush().map_err(output)?;

    let write_err: RefCell<Option<Failure>> = RefCell::new(None);
    let records_json: RefCell<Vec<Value>> = RefCell::new(Vec::new());
    let on_record = |r: &PathRecord| {
        if write_err.borrow().is_some() {
            return;
        }
        let step = (|| -> Result<(), Failure> {
            writer.write_record(csv_row(r)).map_err(output)?;
            writer.flush().map_err(output)?;
            let k = records_json.borrow().len();
            write_snapshot(&out.join("snapshots").join(format!("gamma_{k:02}")), &r.result)?;
            records_json.borrow_mut().push(result_json(cfg, &prob, &r.result)?);
            Ok(())
        })();
        if let Err(e) = step {
            *write_err.borrow_mut() = Some(e);
        }
    };
    let outcome =
        run_path_with(&prob, family.as_ref(), &q0, &cfg.path_config(), &opts, on_record).map_err(Failure::core)?;
    if let Some(e) = write_err.into_inner() {
        return Err(e);
    }
    let floor = opts.saturation_floor();
    let slopes = slopes_json(&outcome.slopes, floor);
    write_json(&out.join("slopes.json"), &slopes)?;
    write_json(&out.join("path.json"), &Value::Array(records_json.into_inner()))?;
    if emit_plot_data {
        let rows: Vec<Vec<String>> = outcome.records.iter().map(csv_row).collect();
        write_plot_data(&out.join("plot"), &rows)?;
    }
    if let Some(e) = outcome.error {
        return Err(Failure::core(e));
    }
    Ok(slopes)
}

/// Two-column `gamma value` files, one per diagnostic column.
fn write_plot_data(dir: &Path, rows: &[Vec<String>]) -> Result<(), Failure> {
    ensure_dir(dir)?;
    for (c, name) in CSV_COLUMNS.iter().enumerate().skip(1) {
        let mut f = fs::File::create(dir.join(format!("{name}.dat"))).map_err(output)?;
        for row in rows {
            writeln!(f, "{} {}", row[0], row[c]).map_err(output)?;
        }
    }
    Ok(())
}

pub fn read_path_csv(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == CSV_COLUMNS, "unexpected columns in {}: {header:?}", path.display());
    reader
        .records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect()
}

/// Summarizes an existing `path.csv` in `out`: table plus refitted slopes.
pub fn cmd_report(cfg: &RunConfig, out: &Path, emit_plot_data: bool) -> Result<String, Failure> {
    let rows = read_path_csv(&out.join("path.csv")).map_err(Failure::Config)?;
    let col = |c: usize| -> anyhow::Result<Vec<f64>> {
        rows.iter().map(|r| r[c].parse::<f64>().map_err(anyhow::Error::from)).collect()
    };
    let parsed = (|| -> anyhow::Result<_> { Ok((col(0)?, col(1)?, col(2)?, col(3)?, col(6)?, col(9)?)) })()
        .map_err(Failure::Config)?;
    let (gammas, j, feas_linf, feas_grad, comp_state, fp) = parsed;
    let floor = cfg.solver_options().saturation_floor();
    let slope = |v: &[f64]| fit_rate(&gammas, v, floor).map_or("n/a".to_string(), |f| format!("{:.4}", f.slope));
    let mut text = String::new();
    text.push_str(&format!("{:>12} {:>14} {:>12} {:>12} {:>12} {:>12}\n", "gamma", "J", "feas_Linf", "feas_grad", "comp_state", "fixed_point"));
    for i in 0..gammas.len() {
        text.push_str(&format!(
            "{:>12.4e} {:>14.6e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
            gammas[i], j[i], feas_linf[i], feas_grad[i], comp_state[i], fp[i]
        ));
    }
    text.push_str(&format!(
        "slope_feas_Linf {}\nslope_feas_grad {}\nslope_comp_state {}\n",
        slope(&feas_linf),
        slope(&feas_grad),
        slope(&comp_state)
    ));
    text.push_str("computed points are stationary points of the regularized problems, not certified global minimizers\n");
    if emit_plot_data {
        write_plot_data(&out.join("plot"), &rows)?;
    }
    Ok(text)
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("obstacle-out")
}
