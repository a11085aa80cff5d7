//! Linear solvers for symmetric positive definite systems.

use super::sparse::{dot, norm2, SparseOperator};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Jacobi-preconditioned conjugate gradients.
    #[default]
    ConjugateGradient,
    /// Banded Cholesky factorization (bandwidth from the node ordering).
    BandCholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolverOptions {
    /// Relative residual target `|Ax - b| / |b|`.
    pub tol: f64,
    /// Iteration cap is `max_iter_factor * dim`.
    pub max_iter_factor: usize,
    pub kind: LinearSolverKind,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        LinearSolverOptions { tol: 1e-10, max_iter_factor: 10, kind: LinearSolverKind::ConjugateGradient }
    }
}

#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for SPD `A`.
pub fn solve_spd(a: &SparseOperator, b: &[f64], opts: &LinearSolverOptions) -> Result<LinearSolve> {
    if b.len() != a.dim() {
        return Err(invalid(format!("rhs length {} does not match operator dimension {}", b.len(), a.dim())));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("linear tolerance must be positive"));
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(LinearSolve { x: vec![0.0; b.len()], iterations: 0, relative_residual: 0.0 });
    }
    match opts.kind {
        LinearSolverKind::ConjugateGradient => pcg(a, b, b_norm, opts),
        LinearSolverKind::BandCholesky => {
            let x = BandCholesky::factor(a)?.solve(b);
            let r = residual(a, &x, b);
            let rel = norm2(&r) / b_norm;
            if rel > opts.tol {
                return Err(Error::LinearSolver { iterations: 1, residual: rel });
            }
            Ok(LinearSolve { x, iterations: 1, relative_residual: rel })
        }
    }
}

fn residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.apply(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn pcg(a: &SparseOperator, b: &[f64], b_norm: f64, opts: &LinearSolverOptions) -> Result<LinearSolve> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = opts.max_iter_factor.max(1) * n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver { iterations: it, residual: rel });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm2(&r) / b_norm;
        if rel <= opts.tol {
            // Guard against drift of the recursive residual.
            let true_rel = norm2(&residual(a, &x, b)) / b_norm;
            if true_rel <= opts.tol {
                return Ok(LinearSolve { x, iterations: it, relative_residual: true_rel });
            }
            r = residual(a, &x, b);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver { iterations: max_iter, residual: rel })
}

/// Cholesky factor `L` of a banded SPD matrix, stored row-wise: row `i` holds
/// columns `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let bw = a.pattern().bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // Slot (i, j) with i - bw <= j <= i lives at i * w + (j + bw - i).
        for i in 0..n {
            for &j in a.pattern().row(i) {
                if j <= i {
                    l[i * w + (j + bw - i)] = a.get(i, j);
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolver { iterations: 0, residual: f64::NAN });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}
