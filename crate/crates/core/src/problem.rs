use std::sync::Arc;

use crate::control::{control_inner, ControlField, SpectralBox};
use crate::error::{invalid, validation, Result};
use crate::fem::{FemSpace, LinearSolverOptions};

/// Nodal data given either as a constant or one value per node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodalData {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl NodalData {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        let v = match self {
            NodalData::Constant(c) => vec![*c; n],
            NodalData::Nodal(v) if v.len() == n => v.clone(),
            NodalData::Nodal(v) => {
                return Err(validation(format!("{what} has {} values, mesh has {n} nodes", v.len())))
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(validation(format!("{what} has non-finite values")));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    /// Constant obstacle, must be negative.
    pub psi: f64,
    pub f: NodalData,
    pub u_d: NodalData,
    /// Tikhonov weight of the control.
    pub alpha: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl ProblemParams {
    /// The reference configuration: `psi = -0.05`, `f = -10`, `u_d = -0.02`,
    /// `alpha = 1e-3`, spectral box `[0.5, 2]`.
    pub fn reference() -> Self {
        ProblemParams {
            psi: -0.05,
            f: NodalData::Constant(-10.0),
            u_d: NodalData::Constant(-0.02),
            alpha: 1e-3,
            q_min: 0.5,
            q_max: 2.0,
        }
    }
}

/// Optimal control problem data on a fixed discretization.
#[derive(Debug)]
pub struct ObstacleProblem {
    space: Arc<FemSpace>,
    psi: f64,
    f: Vec<f64>,
    u_d: Vec<f64>,
    alpha: f64,
    bounds: SpectralBox,
    load: Vec<f64>,
}

impl ObstacleProblem {
    pub fn new(space: Arc<FemSpace>, params: &ProblemParams) -> Result<Self> {
        if !(params.psi.is_finite() && params.psi < 0.0) {
            return Err(invalid(format!("psi must be negative (got {})", params.psi)));
        }
        if !(params.alpha.is_finite() && params.alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive (got {})", params.alpha)));
        }
        let bounds = SpectralBox::new(params.q_min, params.q_max)?;
        let n = space.num_nodes();
        let f = params.f.expand(n, "load f")?;
        let u_d = params.u_d.expand(n, "desired state u_d")?;
        let load = space.load(&f);
        Ok(ObstacleProblem { space, psi: params.psi, f, u_d, alpha: params.alpha, bounds, load })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn shared_space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn u_d(&self) -> &[f64] {
        &self.u_d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounds(&self) -> SpectralBox {
        self.bounds
    }

    /// `M f` with boundary rows zeroed.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn f_l2(&self) -> f64 {
        self.space.l2_norm(&self.f)
    }

    pub fn f_is_nonpositive(&self) -> bool {
        self.f.iter().all(|&x| x <= 0.0)
    }

    /// The midpoint scalar control `((q_min + q_max)/2) I`.
    pub fn midpoint_control(&self) -> ControlField {
        ControlField::scalar(self.space.num_triangles(), self.bounds.midpoint(), self.bounds)
    }

    /// `J(q, u) = 1/2 |u - u_d|^2 + alpha/2 |q|^2`.
    pub fn objective(&self, u: &[f64], q: &[crate::control::Sym2]) -> f64 {
        let diff: Vec<f64> = u.iter().zip(&self.u_d).map(|(a, b)| a - b).collect();
        let tracking = 0.5 * self.space.l2_inner(&diff, &diff);
        let reg = 0.5 * self.alpha * control_inner(&self.space, q, q).expect("control length matches mesh");
        tracking + reg
    }
}

/// Tolerances and caps shared by the state, adjoint and oracle solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub linear: LinearSolverOptions,
    /// Absolute Euclidean norm of the interior Newton residual.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub max_halvings: usize,
    /// Active-set predictor weight `c` in `lambda + c (psi - u) > 0`.
    pub pdas_c: f64,
    pub pdas_max_iters: usize,
    pub comp_tol: f64,
    /// Admissibility slack when validating controls.
    pub feasibility_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            linear: LinearSolverOptions::default(),
            newton_tol: 1e-10,
            newton_max_iters: 50,
            max_halvings: 30,
            pdas_c: 1.0,
            pdas_max_iters: 100,
            comp_tol: 1e-12,
            feasibility_tol: 1e-12,
        }
    }
}

impl SolverOptions {
    /// Diagnostics below this level are not resolved by the discrete solves.
    pub fn saturation_floor(&self) -> f64 {
        (10.0 * self.newton_tol).max(10.0 * self.linear.tol)
    }
}
