//! TOML run configuration. Every key has a default; an empty file (or no
//! file) describes the reference instance.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use obstacle_core::fem::{read_field, LinearSolverKind, LinearSolverOptions};
use obstacle_core::optimize::{default_ladder, PathConfig};
use obstacle_core::smoothed_max::{MaxFamily, PolynomialFamily, ScaledPolynomialFamily};
use obstacle_core::{ControlField, FemSpace, Mesh, NodalData, ObstacleProblem, ProblemParams, SolverOptions};
use serde::Deserialize;

/// A number, or a path to a data file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Source {
    Value(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Cells per side of the structured unit-square mesh.
    pub n: usize,
    /// Mesh file; overrides `n`.
    pub file: Option<PathBuf>,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { n: 64, file: None }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub psi: f64,
    pub f: Source,
    pub u_d: Source,
    pub alpha: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Fixed control for `solve-state`/`oracle` and the start of
    /// `optimize`/`path`: scalar multiple of the identity or a control file.
    pub control: Source,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            psi: -0.05,
            f: Source::Value(-10.0),
            u_d: Source::Value(-0.02),
            alpha: 1e-3,
            q_min: 0.5,
            q_max: 2.0,
            control: Source::Value(1.25),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Instance {
    Polynomial,
    /// The polynomial scaled by 1.1; violates `max_γ ≤ max(0, ·)`.
    Overshoot,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationSection {
    pub instance: Instance,
    /// γ used by `solve-state`, `optimize` and the gradient check.
    pub gamma: f64,
}

impl Default for RegularizationSection {
    fn default() -> Self {
        RegularizationSection { instance: Instance::Polynomial, gamma: 100.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub gamma_ladder: Vec<f64>,
    pub pg_max_iters: usize,
    pub pg_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub s_init: f64,
    pub max_backtracks: usize,
    pub barzilai_borwein: bool,
    pub accelerator: bool,
    pub fd_check: bool,
    pub fd_directions: usize,
    pub seed: u64,
}

impl Default for PathSection {
    fn default() -> Self {
        let d = PathConfig::default();
        PathSection {
            gamma_ladder: default_ladder(),
            pg_max_iters: d.pg_max_iters,
            pg_tol: d.pg_tol,
            armijo_c: d.armijo_c,
            backtrack: d.backtrack,
            s_init: d.s_init,
            max_backtracks: d.max_backtracks,
            barzilai_borwein: d.barzilai_borwein,
            accelerator: d.accelerator,
            fd_check: d.fd_check,
            fd_directions: 3,
            seed: d.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cg,
    Cholesky,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancesSection {
    pub lin_tol: f64,
    pub lin_max_iter_factor: usize,
    pub lin_solver: SolverKind,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub comp_tol: f64,
    pub pdas_max_iters: usize,
    /// Constant in `mu_L1 <= c_mu |u - u_d|_{L^1}`.
    pub c_mu: f64,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        TolerancesSection {
            lin_tol: s.linear.tol,
            lin_max_iter_factor: s.linear.max_iter_factor,
            lin_solver: SolverKind::Cg,
            newton_tol: s.newton_tol,
            newton_max_iters: s.newton_max_iters,
            comp_tol: s.comp_tol,
            pdas_max_iters: s.pdas_max_iters,
            c_mu: 10.0,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub problem: ProblemSection,
    pub regularization: RegularizationSection,
    pub path: PathSection,
    pub tolerances: TolerancesSection,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Scalar checks that need no mesh; everything else is validated when
    /// the problem is built.
    pub fn check(&self) -> anyhow::Result<()> {
        if self.problem.psi >= 0.0 || !self.problem.psi.is_finite() {
            bail!("psi must be negative (got {})", self.problem.psi);
        }
        if !(self.problem.q_min > 0.0 && self.problem.q_min < self.problem.q_max) {
            bail!("need 0 < q_min < q_max (got {}, {})", self.problem.q_min, self.problem.q_max);
        }
        if self.problem.alpha.is_nan() || self.problem.alpha <= 0.0 {
            bail!("alpha must be positive (got {})", self.problem.alpha);
        }
        if !(self.regularization.gamma > 0.0 && self.regularization.gamma.is_finite()) {
            bail!("regularization.gamma must be positive");
        }
        if self.mesh.file.is_none() && self.mesh.n == 0 {
            bail!("mesh.n must be at least 1");
        }
        if !(self.tolerances.lin_tol > 0.0 && self.tolerances.newton_tol > 0.0) {
            bail!("tolerances must be positive");
        }
        self.path_config().validate()?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn space(&self) -> anyhow::Result<Arc<FemSpace>> {
        let mesh = match &self.mesh.file {
            Some(f) => {
                let path = self.resolve(f);
                let (mesh, warnings) =
                    Mesh::read(&path).with_context(|| format!("cannot load mesh {}", path.display()))?;
                for w in warnings {
                    log::warn!("{}: {w:?}", path.display());
                }
                mesh
            }
            None => Mesh::unit_square(self.mesh.n)?,
        };
        Ok(Arc::new(FemSpace::new(mesh)?))
    }

    fn nodal(&self, s: &Source, what: &str) -> anyhow::Result<NodalData> {
        Ok(match s {
            Source::Value(v) => NodalData::Constant(*v),
            Source::File(p) => {
                let path = self.resolve(p);
                NodalData::Nodal(read_field(&path).with_context(|| format!("cannot load {what} from {}", path.display()))?)
            }
        })
    }

    pub fn params(&self) -> anyhow::Result<ProblemParams> {
        let p = &self.problem;
        Ok(ProblemParams {
            psi: p.psi,
            f: self.nodal(&p.f, "f")?,
            u_d: self.nodal(&p.u_d, "u_d")?,
            alpha: p.alpha,
            q_min: p.q_min,
            q_max: p.q_max,
        })
    }

    pub fn problem(&self) -> anyhow::Result<ObstacleProblem> {
        Ok(ObstacleProblem::new(self.space()?, &self.params()?)?)
    }

    pub fn control(&self, prob: &ObstacleProblem) -> anyhow::Result<ControlField> {
        let n = prob.space().num_triangles();
        let q = match &self.problem.control {
            Source::Value(s) => ControlField::scalar(n, *s, prob.bounds()),
            Source::File(p) => {
                let path = self.resolve(p);
                ControlField::read(&path, prob.bounds())
                    .with_context(|| format!("cannot load control from {}", path.display()))?
            }
        };
        q.validate(n, self.solver_options().feasibility_tol).context("initial control is not admissible")?;
        Ok(q)
    }

    pub fn family(&self) -> Box<dyn MaxFamily> {
        match self.regularization.instance {
            Instance::Polynomial => Box::new(PolynomialFamily),
            Instance::Overshoot => Box::new(ScaledPolynomialFamily { factor: 1.1 }),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let t = &self.tolerances;
        SolverOptions {
            linear: LinearSolverOptions {
                tol: t.lin_tol,
                max_iter_factor: t.lin_max_iter_factor,
                kind: match t.lin_solver {
                    SolverKind::Cg => LinearSolverKind::ConjugateGradient,
                    SolverKind::Cholesky => LinearSolverKind::BandCholesky,
                },
            },
            newton_tol: t.newton_tol,
            newton_max_iters: t.newton_max_iters,
            comp_tol: t.comp_tol,
            pdas_max_iters: t.pdas_max_iters,
            ..SolverOptions::default()
        }
    }

    pub fn path_config(&self) -> PathConfig {
        let p = &self.path;
        PathConfig {
            gamma_ladder: p.gamma_ladder.clone(),
            pg_max_iters: p.pg_max_iters,
            pg_tol: p.pg_tol,
            armijo_c: p.armijo_c,
            backtrack: p.backtrack,
            s_init: p.s_init,
            max_backtracks: p.max_backtracks,
            barzilai_borwein: p.barzilai_borwein,
            accelerator: p.accelerator,
            fd_check: p.fd_check,
            seed: p.seed,
        }
    }
}
