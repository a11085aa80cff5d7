//! Acceptance criteria on the reference instance. Each test prints one
//! `ACCEPT <id> <name> PASS|FAIL <measured> <threshold>` line; run with
//! `--nocapture` (or `--show-output`) to see them for passing tests.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use obstacle_cli::RunConfig;
use obstacle_core::control::projection_checks;
use obstacle_core::optimize::{default_fd_steps, fd_gradient_check, random_direction, run_path, PathOutcome};
use obstacle_core::oracle::solve_obstacle_pdas;
use obstacle_core::rates::fit_rate;
use obstacle_core::smoothed_max::certify;
use obstacle_core::state::{solve_state_ladder, LadderPoint};
use obstacle_core::{ControlField, ObstacleProblem};

struct Reference {
    cfg: RunConfig,
    prob: ObstacleProblem,
    q0: ControlField,
}

fn reference() -> &'static Reference {
    static R: OnceLock<Reference> = OnceLock::new();
    R.get_or_init(|| {
        let cfg = RunConfig::parse("", ".").unwrap();
        let prob = cfg.problem().unwrap();
        let q0 = cfg.control(&prob).unwrap();
        Reference { cfg, prob, q0 }
    })
}

fn fixed_q_ladder() -> &'static [LadderPoint] {
    static L: OnceLock<Vec<LadderPoint>> = OnceLock::new();
    L.get_or_init(|| {
        let r = reference();
        let opts = r.cfg.solver_options();
        solve_state_ladder(&r.prob, &r.q0, r.cfg.family().as_ref(), &r.cfg.path.gamma_ladder, true, &opts).unwrap()
    })
}

fn optimized_path() -> &'static PathOutcome {
    static P: OnceLock<PathOutcome> = OnceLock::new();
    P.get_or_init(|| {
        let r = reference();
        let out = run_path(
            &r.prob,
            r.cfg.family().as_ref(),
            &r.q0,
            &r.cfg.path_config(),
            &r.cfg.solver_options(),
        )
        .unwrap();
        assert!(out.error.is_none(), "path aborted: {:?}", out.error);
        out
    })
}

fn report(id: u32, name: &str, pass: bool, measured: impl std::fmt::Display, threshold: impl std::fmt::Display) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPT {id:02} {name} {verdict} {measured} {threshold}");
    assert!(pass, "criterion {id} ({name}) failed: measured {measured}, threshold {threshold}");
}

#[test]
fn criterion_01_smoothed_max_certificate() {
    let r = reference();
    let family = r.cfg.family();
    let mut failed = Vec::new();
    let mut count = 0;
    for &gamma in &r.cfg.path.gamma_ladder {
        let m = family.at(gamma).unwrap();
        for c in certify(m.as_ref(), 10_000, r.cfg.path.seed).checks() {
            count += 1;
            if !c.pass {
                failed.push(format!("{c}[gamma={gamma:e}]"));
            }
        }
    }
    report(1, "smoothed_max_certificate", failed.is_empty(), format!("failed={}/{count}", failed.len()), "failed=0");
}

#[test]
fn criterion_02_lemma_bounds() {
    let r = reference();
    let f = r.prob.f_l2();
    let pts = fixed_q_ladder();
    let r_ratio = pts.iter().map(|p| p.solution.report.r_norm_l2 / f).fold(0.0, f64::max);
    let div_ratio = pts.iter().map(|p| p.solution.report.div_norm_l2 / f).fold(0.0, f64::max);
    let bound = 1.0 + 1e-6;
    report(
        2,
        "lemma_bounds",
        r_ratio <= bound && div_ratio <= bound,
        format!("r/f={r_ratio:.6e},div/f={div_ratio:.6e}"),
        format!("{bound}"),
    );
}

#[test]
fn criterion_03_feasibility_rates() {
    let r = reference();
    let pts = fixed_q_ladder();
    let gammas: Vec<f64> = pts.iter().map(|p| p.gamma).collect();
    let floor = r.cfg.solver_options().saturation_floor();
    let slope = |v: Vec<f64>| fit_rate(&gammas, &v, floor).map_or(f64::NAN, |f| f.slope);
    let s_inf = slope(pts.iter().map(|p| p.solution.report.feas_linf).collect());
    let s_grad = slope(pts.iter().map(|p| p.solution.report.feas_grad_l2).collect());
    report(
        3,
        "feasibility_rates",
        (-1.3..=-0.8).contains(&s_inf) && (-0.75..=-0.35).contains(&s_grad),
        format!("linf={s_inf:.4},grad={s_grad:.4}"),
        "linf∈[-1.3,-0.8],grad∈[-0.75,-0.35]",
    );
}

#[test]
fn criterion_04_oracle_consistency() {
    let r = reference();
    let oracle = solve_obstacle_pdas(&r.prob, &r.q0, &r.cfg.solver_options()).unwrap();
    let space = r.prob.space();
    let diffs: Vec<Vec<f64>> = fixed_q_ladder()
        .iter()
        .map(|p| p.solution.u.values.iter().zip(&oracle.u.values).map(|(a, b)| a - b).collect())
        .collect();
    let h1: Vec<f64> = diffs.iter().map(|d| space.h1_seminorm(d)).collect();
    let decreasing = h1.windows(2).all(|w| w[1] < w[0]);
    let rel_l2 = space.l2_norm(diffs.last().unwrap()) / space.l2_norm(&oracle.u.values);
    report(
        4,
        "oracle_consistency",
        decreasing && rel_l2 <= 1e-3,
        format!("h1_decreasing={decreasing},rel_l2={rel_l2:.4e}"),
        "h1_decreasing=true,rel_l2<=1e-3",
    );
}

#[test]
fn criterion_05_gradient_check() {
    let r = reference();
    let opts = r.cfg.solver_options();
    let family = r.cfg.family();
    let at_100 = optimized_path().records.iter().find(|p| p.gamma == 100.0).expect("ladder contains 1e2");
    let m = family.at(100.0).unwrap();
    let mut worst = 0.0f64;
    for q in [&r.q0, &at_100.result.q] {
        for k in 0..3 {
            let d = random_direction(r.prob.space(), r.cfg.path.seed + k);
            let fd = fd_gradient_check(&r.prob, m.as_ref(), q, &d, &default_fd_steps(), &opts).unwrap();
            worst = worst.max(fd.best_rel_error);
        }
    }
    report(5, "gradient_check", worst <= 1e-5, format!("{worst:.3e}"), "1e-5");
}

#[test]
fn criterion_06_stationarity() {
    let recs = &optimized_path().records;
    let vi = recs.iter().map(|p| p.result.kkt.vi_residual).fold(0.0, f64::max);
    let fp = recs.iter().map(|p| p.result.kkt.control_fixed_point_residual).fold(0.0, f64::max);
    report(
        6,
        "stationarity",
        vi <= 1e-6 && fp <= 1e-5,
        format!("vi={vi:.3e},fixed_point={fp:.3e}"),
        "vi<=1e-6,fixed_point<=1e-5",
    );
}

#[test]
fn criterion_07_complementarity_trends() {
    let recs = &optimized_path().records;
    let (first, last) = (&recs[0].result.kkt, &recs[recs.len() - 1].result.kkt);
    let ratios = [
        first.comp_state / last.comp_state,
        first.comp_adjoint / last.comp_adjoint,
        first.comp_mu / last.comp_mu,
    ];
    let lambda_min = recs.iter().map(|p| p.result.kkt.lambda_min_nodal).fold(f64::INFINITY, f64::min);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    report(
        7,
        "complementarity_trends",
        min_ratio >= 10.0 && lambda_min >= -1e-12,
        format!("state={:.1}x,adjoint={:.1}x,mu={:.1}x,lambda_min={lambda_min:e}", ratios[0], ratios[1], ratios[2]),
        "ratio>=10,lambda_min>=-1e-12",
    );
}

#[test]
fn criterion_08_multiplier_bounds() {
    let recs = &optimized_path().records;
    let mu_ratio = recs.iter().map(|p| p.result.kkt.mu_l1 / (10.0 * p.result.kkt.u_minus_ud_l1)).fold(0.0, f64::max);
    let p_h1: Vec<f64> = recs.iter().map(|p| p.result.kkt.p_h1_semi).collect();
    let spread = p_h1.iter().copied().fold(0.0, f64::max) / p_h1.iter().copied().fold(f64::INFINITY, f64::min);
    report(
        8,
        "multiplier_bounds",
        mu_ratio <= 1.0 && spread <= 3.0,
        format!("mu_l1/(10*rhs)={mu_ratio:.3e},p_h1_spread={spread:.2}"),
        "mu<=1,spread<=3",
    );
}

#[test]
fn criterion_09_projection_certificate() {
    let checks = projection_checks(10_000, reference().cfg.path.seed);
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.to_string()).collect();
    report(
        9,
        "projection_certificate",
        failed.is_empty(),
        format!("failed={}/{}", failed.len(), checks.len()),
        "failed=0",
    );
}

#[test]
fn criterion_10_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_obstacle"))
            .args(["path", "--seed", "42", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("path.csv")).unwrap()
    };
    let (a, b) = (run(dirs[0].path()), run(dirs[1].path()));
    let slopes_equal = std::fs::read(dirs[0].path().join("slopes.json")).unwrap()
        == std::fs::read(dirs[1].path().join("slopes.json")).unwrap();
    report(
        10,
        "determinism",
        a == b && !a.is_empty() && slopes_equal,
        format!("csv_identical={},slopes_identical={slopes_equal}", a == b),
        "identical",
    );
}
