//! Projected gradient descent on the reduced regularized objective and the
//! γ continuation path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{kkt_report, multipliers, solve_adjoint_with, KktReport};
use crate::control::{
    control_inner, control_norm, fixed_point_control, outer_terms, reduced_gradient, vi_residual, ControlField, Sym2,
};
use crate::error::{invalid, validation, Error, Result};
use crate::fem::{FemSpace, StateField};
use crate::problem::{ObstacleProblem, SolverOptions};
use crate::rates::fit_rate;
use crate::smoothed_max::{MaxFamily, SmoothMax};
use crate::state::{solve_regularized_state, solve_state_with_coefficient, StateSolution, StateSolveReport};

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    pub gamma_ladder: Vec<f64>,
    pub pg_max_iters: usize,
    /// Target for `vi_residual`; the fixed-point residual must also reach
    /// `10 * pg_tol`.
    pub pg_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// First trial step, and the fallback when the BB quotient is unusable.
    pub s_init: f64,
    pub max_backtracks: usize,
    /// Start each line search from the Barzilai-Borwein step.
    pub barzilai_borwein: bool,
    /// Try the fixed-point map `q <- P(sym(grad u ⊗ grad p)/α)` first.
    pub accelerator: bool,
    pub fd_check: bool,
    pub seed: u64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            gamma_ladder: default_ladder(),
            pg_max_iters: 2000,
            pg_tol: 1e-6,
            armijo_c: 1e-4,
            backtrack: 0.5,
            s_init: 1.0,
            max_backtracks: 60,
            barzilai_borwein: true,
            accelerator: true,
            fd_check: false,
            seed: 42,
        }
    }
}

/// `10^1, 10^1.5, ..., 10^4`.
pub fn default_ladder() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(1.0 + 0.5 * k as f64)).collect()
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_ladder.is_empty() {
            return Err(invalid("gamma ladder is empty"));
        }
        if self.gamma_ladder.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(invalid("gamma ladder entries must be positive and finite"));
        }
        if self.gamma_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("gamma ladder must be strictly increasing"));
        }
        if !(self.pg_tol > 0.0) || !(self.s_init > 0.0) {
            return Err(invalid("pg_tol and s_init must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("armijo_c and backtrack must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn converged(&self, vi: f64, fixed_point: f64) -> bool {
        vi <= self.pg_tol && fixed_point <= 10.0 * self.pg_tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgStatus {
    Converged,
    /// No step along the projection arc satisfied the Armijo condition.
    Stalled,
    MaxIterations,
}

/// One fully evaluated control: state, adjoint, gradient and residuals.
#[derive(Clone, Debug)]
struct Iterate {
    q: ControlField,
    state: StateSolution,
    p: StateField,
    j: f64,
    /// L^2 representative `α q - sym(grad u ⊗ grad p)`.
    grad: Vec<Sym2>,
    outer: Vec<Sym2>,
    vi: f64,
    fixed_point: f64,
}

struct Trial {
    q: ControlField,
    state: StateSolution,
    j: f64,
}

fn trial(prob: &ObstacleProblem, m: &dyn SmoothMax, q: ControlField, guess: &StateField, opts: &SolverOptions) -> Result<Trial> {
    let state = solve_regularized_state(prob, &q, m, guess, opts)?;
    let j = prob.objective(&state.u.values, &q.entries);
    Ok(Trial { q, state, j })
}

fn complete(prob: &ObstacleProblem, t: Trial, opts: &SolverOptions) -> Result<Iterate> {
    let space = prob.space();
    let p = solve_adjoint_with(prob, &t.state.jacobian, &t.state.u, opts)?;
    let u = &t.state.u.values;
    let g = reduced_gradient(space, prob.alpha(), &t.q, u, &p.values);
    let outer = outer_terms(space, u, &p.values);
    let vi = vi_residual(space, &t.q, &g);
    let fixed_point = crate::control::fixed_point_residual(space, prob.alpha(), &t.q, &outer);
    Ok(Iterate {
        grad: g.unweighted(space),
        q: t.q,
        state: t.state,
        p,
        j: t.j,
        outer,
        vi,
        fixed_point,
    })
}

fn l2_diff_inner(space: &FemSpace, a: &[Sym2], b: &[Sym2], c: &[Sym2], d: &[Sym2]) -> f64 {
    let x: Vec<Sym2> = a.iter().zip(b).map(|(a, b)| a.sub(*b)).collect();
    let y: Vec<Sym2> = c.iter().zip(d).map(|(c, d)| c.sub(*d)).collect();
    control_inner(space, &x, &y).expect("fields share the mesh")
}

#[derive(Clone, Debug)]
pub struct FixedGammaResult {
    pub gamma: f64,
    pub q: ControlField,
    pub u: StateField,
    pub p: StateField,
    pub state_report: StateSolveReport,
    pub kkt: KktReport,
    pub iterations: usize,
    pub status: PgStatus,
    /// Objective after every accepted step, starting with `J(q0)`.
    pub objective_history: Vec<f64>,
    pub vi_history: Vec<f64>,
    pub accelerated_steps: usize,
}

/// Minimizes the regularized reduced objective over the admissible set,
/// starting at a feasible `q0` (and optionally a state guess).
pub fn optimize_fixed_gamma(
    prob: &ObstacleProblem,
    m: &dyn SmoothMax,
    q0: &ControlField,
    u0: Option<&StateField>,
    cfg: &PathConfig,
    opts: &SolverOptions,
) -> Result<FixedGammaResult> {
    cfg.validate()?;
    let space = prob.space();
    let zero = StateField::zeros(space.num_nodes());
    let mut cur = complete(prob, trial(prob, m, q0.clone(), u0.unwrap_or(&zero), opts)?, opts)?;
    let mut objective_history = vec![cur.j];
    let mut vi_history = vec![cur.vi];
    let mut step = cfg.s_init;
    let mut accelerated_steps = 0;
    let mut iterations = 0;
    let status = loop {
        if cfg.converged(cur.vi, cur.fixed_point) {
            break PgStatus::Converged;
        }
        if iterations == cfg.pg_max_iters {
            log::warn!("projected gradient hit {} iterations at gamma {:e}", cfg.pg_max_iters, m.gamma());
            break PgStatus::MaxIterations;
        }
        let armijo = |t: &Trial| {
            let dq: Vec<Sym2> = t.q.entries.iter().zip(&cur.q.entries).map(|(a, b)| a.sub(*b)).collect();
            let decrease = control_inner(space, &dq, &cur.grad).expect("fields share the mesh");
            t.j <= cur.j + cfg.armijo_c * decrease && t.j <= cur.j
        };

        let mut accepted: Option<(Trial, bool)> = None;
        if cfg.accelerator {
            let q_fp = fixed_point_control(prob.alpha(), cur.q.bounds, &cur.outer);
            if q_fp != cur.q {
                let t = trial(prob, m, q_fp, &cur.state.u, opts)?;
                if armijo(&t) {
                    accepted = Some((t, true));
                }
            }
        }
        if accepted.is_none() {
            let mut s = step;
            for _ in 0..=cfg.max_backtracks {
                let entries = cur
                    .q
                    .entries
                    .iter()
                    .zip(&cur.grad)
                    .map(|(q, g)| cur.q.bounds.project(q.axpy(-s, *g)))
                    .collect();
                let q_trial = ControlField { entries, bounds: cur.q.bounds };
                if q_trial == cur.q {
                    break;
                }
                let t = trial(prob, m, q_trial, &cur.state.u, opts)?;
                if armijo(&t) {
                    accepted = Some((t, false));
                    break;
                }
                s *= cfg.backtrack;
            }
        }
        let Some((t, accelerated)) = accepted else {
            log::warn!(
                "line search stalled at gamma {:e} (vi {:e}, fixed point {:e})",
                m.gamma(),
                cur.vi,
                cur.fixed_point
            );
            break PgStatus::Stalled;
        };
        accelerated_steps += usize::from(accelerated);
        let next = complete(prob, t, opts)?;
        step = if cfg.barzilai_borwein {
            let ss = l2_diff_inner(space, &next.q.entries, &cur.q.entries, &next.q.entries, &cur.q.entries);
            let sy = l2_diff_inner(space, &next.q.entries, &cur.q.entries, &next.grad, &cur.grad);
            let bb = ss / sy;
            if sy > 0.0 && bb.is_finite() {
                bb.clamp(1e-10, 1e10)
            } else {
                cfg.s_init
            }
        } else {
            cfg.s_init
        };
        cur = next;
        iterations += 1;
        objective_history.push(cur.j);
        vi_history.push(cur.vi);
    };

    let u = &cur.state.u.values;
    let mult = multipliers(prob, u, &cur.p.values, m);
    let kkt = kkt_report(prob, &cur.q, u, &cur.p.values, &mult, m, &cur.state.report);
    Ok(FixedGammaResult {
        gamma: m.gamma(),
        q: cur.q,
        u: cur.state.u,
        p: cur.p,
        state_report: cur.state.report,
        kkt,
        iterations,
        status,
        objective_history,
        vi_history,
        accelerated_steps,
    })
}

#[derive(Clone, Debug)]
pub struct PathRecord {
    pub gamma: f64,
    pub result: FixedGammaResult,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathSlopes {
    pub slope_feas_linf: Option<f64>,
    pub slope_feas_grad: Option<f64>,
    pub slope_comp_state: Option<f64>,
}

impl PathSlopes {
    /// Fits over the records' pre-saturation window; a diagnostic with
    /// fewer than three usable points gets `None`.
    pub fn fit(records: &[PathRecord], floor: f64) -> Self {
        let gammas: Vec<f64> = records.iter().map(|r| r.gamma).collect();
        let slope = |f: fn(&KktReport) -> f64| {
            let v: Vec<f64> = records.iter().map(|r| f(&r.result.kkt)).collect();
            fit_rate(&gammas, &v, floor).ok().map(|fit| fit.slope)
        };
        PathSlopes {
            slope_feas_linf: slope(|k| k.feas_linf),
            slope_feas_grad: slope(|k| k.feas_grad_l2),
            slope_comp_state: slope(|k| k.comp_state),
        }
    }
}

#[derive(Debug)]
pub struct PathOutcome {
    pub records: Vec<PathRecord>,
    pub slopes: PathSlopes,
    /// Failure that aborted the path; `records` holds the completed prefix.
    pub error: Option<Error>,
}

pub fn run_path(
    prob: &ObstacleProblem,
    family: &dyn MaxFamily,
    q0: &ControlField,
    cfg: &PathConfig,
    opts: &SolverOptions,
) -> Result<PathOutcome> {
    run_path_with(prob, family, q0, cfg, opts, |_| {})
}

/// Runs the warm-started continuation, calling `on_record` after each γ.
pub fn run_path_with(
    prob: &ObstacleProblem,
    family: &dyn MaxFamily,
    q0: &ControlField,
    cfg: &PathConfig,
    opts: &SolverOptions,
    mut on_record: impl FnMut(&PathRecord),
) -> Result<PathOutcome> {
    cfg.validate()?;
    q0.validate(prob.space().num_triangles(), opts.feasibility_tol)?;
    let mut records: Vec<PathRecord> = Vec::with_capacity(cfg.gamma_ladder.len());
    let mut error = None;
    for &gamma in &cfg.gamma_ladder {
        let step = family.at(gamma).and_then(|m| {
            let (q, u) = match records.last() {
                Some(r) => (&r.result.q, Some(&r.result.u)),
                None => (q0, None),
            };
            optimize_fixed_gamma(prob, m.as_ref(), q, u, cfg, opts)
        });
        match step {
            Ok(result) => {
                log::info!(
                    "gamma {gamma:e}: J {:e}, {} PG iterations, status {:?}",
                    result.kkt.objective,
                    result.iterations,
                    result.status
                );
                let record = PathRecord { gamma, result };
                on_record(&record);
                records.push(record);
            }
            Err(e) => {
                log::error!("path aborted at gamma {gamma:e}: {e}");
                error = Some(e);
                break;
            }
        }
    }
    let slopes = PathSlopes::fit(&records, opts.saturation_floor());
    Ok(PathOutcome { records, slopes, error })
}

/// `h = 1e-2, 1e-3, ..., 1e-7`.
pub fn default_fd_steps() -> Vec<f64> {
    (2..=7).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdRow {
    pub h: f64,
    pub finite_difference: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdCheck {
    pub best_rel_error: f64,
    pub analytic: f64,
    pub table: Vec<FdRow>,
    /// Zero direction: the check holds vacuously.
    pub degenerate: bool,
}

/// Central differences of the reduced objective along `direction` versus
/// the adjoint gradient pairing `sum_T G_T : d_T`.
///
/// Perturbed coefficients may leave the admissible box but must keep both
/// eigenvalues above `q_min / 2` on every triangle.
pub fn fd_gradient_check(
    prob: &ObstacleProblem,
    m: &dyn SmoothMax,
    q: &ControlField,
    direction: &[Sym2],
    h_values: &[f64],
    opts: &SolverOptions,
) -> Result<FdCheck> {
    let space = prob.space();
    if direction.len() != q.len() {
        return Err(validation(format!("direction has {} entries, control has {}", direction.len(), q.len())));
    }
    if h_values.is_empty() || h_values.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("finite-difference steps must be positive"));
    }
    let base = solve_regularized_state(prob, q, m, &StateField::zeros(space.num_nodes()), opts)?;
    let p = solve_adjoint_with(prob, &base.jacobian, &base.u, opts)?;
    let g = reduced_gradient(space, prob.alpha(), q, &base.u.values, &p.values);
    let analytic = g.pairing(direction);
    if direction.iter().all(|d| *d == Sym2::ZERO) {
        return Ok(FdCheck { best_rel_error: 0.0, analytic, table: Vec::new(), degenerate: true });
    }

    let floor = 0.5 * q.bounds.q_min();
    let h_max = h_values.iter().copied().fold(0.0, f64::max);
    for (t, (qt, dt)) in q.entries.iter().zip(direction).enumerate() {
        for s in [h_max, -h_max] {
            if qt.axpy(s, *dt).eigenvalues().0 < floor {
                return Err(validation(format!(
                    "perturbation by {s:e} drops triangle {t} below half the lower spectral bound"
                )));
            }
        }
    }

    let objective_at = |s: f64| -> Result<f64> {
        let entries: Vec<Sym2> = q.entries.iter().zip(direction).map(|(a, d)| a.axpy(s, *d)).collect();
        let sol = solve_state_with_coefficient(prob, &entries, m, &base.u, opts)?;
        Ok(prob.objective(&sol.u.values, &entries))
    };
    let mut table = Vec::with_capacity(h_values.len());
    for &h in h_values {
        let fd = (objective_at(h)? - objective_at(-h)?) / (2.0 * h);
        let rel_error = (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
        table.push(FdRow { h, finite_difference: fd, analytic, rel_error });
    }
    let best_rel_error = table.iter().map(|r| r.rel_error).fold(f64::INFINITY, f64::min);
    Ok(FdCheck { best_rel_error, analytic, table, degenerate: false })
}

/// Seeded smooth test direction `B0 + x B1 + y B2` (evaluated at triangle
/// centroids) with unit L^2 norm.
pub fn random_direction(space: &FemSpace, seed: u64) -> Vec<Sym2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Sym2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (b0, b1, b2) = (draw(), draw(), draw());
    let d: Vec<Sym2> = (0..space.num_triangles())
        .map(|t| {
            let [x, y] = space.mesh().centroid(t);
            b0.axpy(x, b1).axpy(y, b2)
        })
        .collect();
    let norm = control_norm(space, &d).expect("direction matches mesh");
    d.iter().map(|e| e.scale(1.0 / norm)).collect()
}
