//! Matrix-valued controls: one symmetric 2x2 matrix per triangle, constrained
//! to a spectral box `q_min I <= q <= q_max I`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::PropertyCheck;
use crate::error::{invalid, validation, Error, Result};
use crate::fem::{format_f64, FemSpace};
use crate::mesh::parse_fields;
use crate::par;

/// Symmetric 2x2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { a11: 0.0, a22: 0.0, a12: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { a11: 1.0, a22: 1.0, a12: 0.0 };

    pub const fn new(a11: f64, a22: f64, a12: f64) -> Self {
        Sym2 { a11, a22, a12 }
    }

    pub const fn scalar(s: f64) -> Self {
        Sym2 { a11: s, a22: s, a12: 0.0 }
    }

    /// Symmetric part of a general matrix (Frobenius-orthogonal projection
    /// onto symmetric matrices).
    pub fn symmetrize(m: [[f64; 2]; 2]) -> Self {
        Sym2 { a11: m[0][0], a22: m[1][1], a12: 0.5 * (m[0][1] + m[1][0]) }
    }

    /// `sym(a ⊗ b)`.
    pub fn sym_outer(a: [f64; 2], b: [f64; 2]) -> Self {
        Sym2 { a11: a[0] * b[0], a22: a[1] * b[1], a12: 0.5 * (a[0] * b[1] + a[1] * b[0]) }
    }

    pub fn to_matrix(self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a22.is_finite() && self.a12.is_finite()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1]]
    }

    /// Frobenius inner product `A : B`.
    pub fn frob(&self, o: &Sym2) -> f64 {
        self.a11 * o.a11 + self.a22 * o.a22 + 2.0 * self.a12 * o.a12
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob(self).sqrt()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Sym2) -> Sym2 {
        Sym2 { a11: self.a11 + o.a11, a22: self.a22 + o.a22, a12: self.a12 + o.a12 }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { a11: self.a11 - o.a11, a22: self.a22 - o.a22, a12: self.a12 - o.a12 }
    }

    pub fn scale(self, s: f64) -> Sym2 {
        Sym2 { a11: s * self.a11, a22: s * self.a22, a12: s * self.a12 }
    }

    /// `self + s * o`.
    pub fn axpy(self, s: f64, o: Sym2) -> Sym2 {
        Sym2 { a11: self.a11 + s * o.a11, a22: self.a22 + s * o.a22, a12: self.a12 + s * o.a12 }
    }

    /// Eigenvalues `(low, high)` from the trace/discriminant formulas.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let rad = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (mean - rad, mean + rad)
    }
}

/// Spectral bounds `0 < q_min < q_max` of the admissible set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBox {
    q_min: f64,
    q_max: f64,
}

impl SpectralBox {
    pub fn new(q_min: f64, q_max: f64) -> Result<Self> {
        if !(q_min.is_finite() && q_max.is_finite() && 0.0 < q_min && q_min < q_max) {
            return Err(invalid(format!("need 0 < q_min < q_max, got q_min = {q_min}, q_max = {q_max}")));
        }
        Ok(SpectralBox { q_min, q_max })
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.q_min + self.q_max)
    }

    /// Amount by which `m`'s spectrum leaves the box (0 if feasible).
    pub fn violation(&self, m: &Sym2) -> f64 {
        let (lo, hi) = m.eigenvalues();
        (self.q_min - lo).max(hi - self.q_max).max(0.0)
    }

    /// Orthogonal projection of a symmetric matrix onto the box by clamping
    /// its eigenvalues. Feasible inputs are returned unchanged.
    pub fn project(&self, m: Sym2) -> Sym2 {
        let (lo, hi) = m.eigenvalues();
        if lo >= self.q_min && hi <= self.q_max {
            return m;
        }
        let clamp = |x: f64| x.clamp(self.q_min, self.q_max);
        let half_diff = 0.5 * (m.a11 - m.a22);
        let rad = half_diff.hypot(m.a12);
        if rad <= 1e-14 * m.frob_norm() {
            return Sym2 { a11: clamp(m.a11), a22: clamp(m.a22), a12: 0.0 };
        }
        // m = mean I + rad N with N an involution; clamping only rescales
        // the two spectral components, so no eigenvectors are formed.
        let (c_lo, c_hi) = (clamp(lo), clamp(hi));
        let mean = 0.5 * (c_lo + c_hi);
        let s = 0.5 * (c_hi - c_lo) / rad;
        Sym2 { a11: mean + s * half_diff, a22: mean - s * half_diff, a12: s * m.a12 }
    }
}

/// Projection of a general 2x2 matrix onto the admissible matrix set:
/// symmetrize, then clamp eigenvalues.
pub fn project_ad(m: [[f64; 2]; 2], q_min: f64, q_max: f64) -> Result<Sym2> {
    let bx = SpectralBox::new(q_min, q_max)?;
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(validation("cannot project a matrix with non-finite entries"));
    }
    Ok(bx.project(Sym2::symmetrize(m)))
}

/// Piecewise-constant symmetric-matrix control on a triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField {
    pub entries: Vec<Sym2>,
    pub bounds: SpectralBox,
}

impl ControlField {
    pub fn constant(num_triangles: usize, m: Sym2, bounds: SpectralBox) -> Self {
        ControlField { entries: vec![m; num_triangles], bounds }
    }

    pub fn scalar(num_triangles: usize, s: f64, bounds: SpectralBox) -> Self {
        Self::constant(num_triangles, Sym2::scalar(s), bounds)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, e| m.max(self.bounds.violation(e)))
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.is_finite()) && self.max_violation() <= tol
    }

    /// Checks finiteness and spectral feasibility (up to `tol`).
    pub fn validate(&self, num_triangles: usize, tol: f64) -> Result<()> {
        if self.len() != num_triangles {
            return Err(validation(format!("control has {} entries, mesh has {num_triangles} triangles", self.len())));
        }
        if let Some(t) = self.entries.iter().position(|e| !e.is_finite()) {
            return Err(validation(format!("control on triangle {t} has non-finite entries")));
        }
        let v = self.max_violation();
        if v > tol {
            return Err(validation(format!("control leaves the admissible spectral box by {v:e}")));
        }
        Ok(())
    }

    pub fn projected(&self) -> ControlField {
        let bx = self.bounds;
        ControlField { entries: par::map_slice(&self.entries, |m| bx.project(*m)), bounds: bx }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(72 * (self.len() + 1));
        let _ = writeln!(s, "control {}", self.len());
        for m in &self.entries {
            let _ = writeln!(s, "{} {} {}", format_f64(m.a11), format_f64(m.a22), format_f64(m.a12));
        }
        s
    }

    pub fn parse(text: &str, bounds: SpectralBox) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty control file".into() })?;
        let mut it = header.split_whitespace();
        let m = match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some("control"), Some(Ok(m)), None) => m,
            _ => return Err(Error::Parse { line, message: format!("expected `control <count>`, found `{header}`") }),
        };
        let mut entries = Vec::with_capacity(m);
        for (line, l) in lines {
            if entries.len() == m {
                return Err(Error::Parse { line, message: "more entries than declared".into() });
            }
            let v = parse_fields::<f64>(l, 3, line)?;
            entries.push(Sym2::new(v[0], v[1], v[2]));
        }
        if entries.len() != m {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("declared {m} entries, found {}", entries.len()),
            });
        }
        Ok(ControlField { entries, bounds })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>, bounds: SpectralBox) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, bounds)
    }
}

/// Area-weighted reduced gradient `G_T = |T| (alpha q_T - sym(grad u ⊗ grad p))`,
/// so that `j'(q) dq = sum_T G_T : dq_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGradient {
    pub entries: Vec<Sym2>,
}

impl ControlGradient {
    /// `sum_T G_T : d_T`.
    pub fn pairing(&self, d: &[Sym2]) -> f64 {
        par::ordered_sum(self.entries.iter().zip(d).map(|(g, d)| g.frob(d)))
    }

    /// Per-element gradient with the area weight removed (the L^2 Riesz
    /// representative).
    pub fn unweighted(&self, space: &FemSpace) -> Vec<Sym2> {
        self.entries.iter().zip(space.areas()).map(|(g, a)| g.scale(1.0 / a)).collect()
    }
}

/// `(a, b) = sum_T |T| a_T : b_T`.
pub fn control_inner(space: &FemSpace, a: &[Sym2], b: &[Sym2]) -> Result<f64> {
    let n = space.num_triangles();
    if a.len() != n || b.len() != n {
        return Err(validation(format!(
            "control fields of length {} and {} on a mesh with {n} triangles",
            a.len(),
            b.len()
        )));
    }
    Ok(par::ordered_sum(space.areas().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x.frob(y))))
}

pub fn control_norm(space: &FemSpace, a: &[Sym2]) -> Result<f64> {
    Ok(control_inner(space, a, a)?.max(0.0).sqrt())
}

/// Plain per-element outer-product term `sym(grad u ⊗ grad p)`.
pub fn outer_terms(space: &FemSpace, u: &[f64], p: &[f64]) -> Vec<Sym2> {
    par::map_range(space.num_triangles(), |t| Sym2::sym_outer(space.gradient(u, t), space.gradient(p, t)))
}

/// Per-element `alpha q_T - sym(grad u ⊗ grad p)` without area weight.
pub fn plain_gradient(space: &FemSpace, alpha: f64, q: &[Sym2], u: &[f64], p: &[f64]) -> Vec<Sym2> {
    par::map_range(space.num_triangles(), |t| {
        q[t].scale(alpha).sub(Sym2::sym_outer(space.gradient(u, t), space.gradient(p, t)))
    })
}

pub fn reduced_gradient(space: &FemSpace, alpha: f64, q: &ControlField, u: &[f64], p: &[f64]) -> ControlGradient {
    let geometry: Vec<f64> = space.areas().collect();
    let plain = plain_gradient(space, alpha, &q.entries, u, p);
    ControlGradient { entries: plain.iter().zip(&geometry).map(|(g, a)| g.scale(*a)).collect() }
}

/// Projected-gradient stationarity measure with unit reference step:
/// `|q - P(q - G/|T|)|_{L^2}`.
pub fn vi_residual(space: &FemSpace, q: &ControlField, g: &ControlGradient) -> f64 {
    let bx = q.bounds;
    let areas: Vec<f64> = space.areas().collect();
    let per = par::map_range(q.len(), |t| {
        let d = q.entries[t].sub(bx.project(q.entries[t].axpy(-1.0 / areas[t], g.entries[t])));
        areas[t] * d.frob(&d)
    });
    par::ordered_sum(per).sqrt()
}

/// `|q - P((1/alpha) sym(grad u ⊗ grad p))|_{L^2}`: zero exactly at
/// stationary points of the reduced problem.
pub fn fixed_point_residual(space: &FemSpace, alpha: f64, q: &ControlField, outer: &[Sym2]) -> f64 {
    let bx = q.bounds;
    let areas: Vec<f64> = space.areas().collect();
    let per = par::map_range(q.len(), |t| {
        let d = q.entries[t].sub(bx.project(outer[t].scale(1.0 / alpha)));
        areas[t] * d.frob(&d)
    });
    par::ordered_sum(per).sqrt()
}

/// The fixed-point map `P((1/alpha) sym(grad u ⊗ grad p))`.
pub fn fixed_point_control(alpha: f64, bounds: SpectralBox, outer: &[Sym2]) -> ControlField {
    ControlField { entries: par::map_slice(outer, |s| bounds.project(s.scale(1.0 / alpha))), bounds }
}

/// Projection certificate: the three reference examples, then idempotence,
/// feasibility and nonexpansiveness over `samples` seeded random inputs.
pub fn projection_checks(samples: usize, seed: u64) -> Vec<PropertyCheck> {
    let examples = [
        ([[0.5, 0.0], [0.0, 3.0]], (1.0, 2.0), Sym2::new(1.0, 2.0, 0.0)),
        ([[1.0, 0.0], [0.0, 1.0]], (0.5, 2.0), Sym2::IDENTITY),
        ([[0.0, 2.0], [0.0, 0.0]], (0.1, 2.0), Sym2::new(0.55, 0.55, 0.45)),
    ];
    let example_err = examples
        .iter()
        .map(|(m, (lo, hi), want)| project_ad(*m, *lo, *hi).map_or(f64::INFINITY, |p| p.sub(*want).frob_norm()))
        .fold(0.0, f64::max);

    let bx = SpectralBox::new(0.5, 2.0).expect("valid bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Sym2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
    let pairs: Vec<(Sym2, Sym2)> = (0..samples).map(|_| (draw(), draw())).collect();
    let per = par::map_slice(&pairs, |(x, y)| {
        let (px, py) = (bx.project(*x), bx.project(*y));
        let idem = bx.project(px).sub(px).frob_norm();
        let excess = px.sub(py).frob_norm() - x.sub(*y).frob_norm();
        (idem, excess, bx.violation(&px).max(bx.violation(&py)))
    });
    let max_of = |f: fn(&(f64, f64, f64)) -> f64| per.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    vec![
        PropertyCheck::at_most("projection.examples", example_err, 1e-12),
        PropertyCheck::at_most("projection.idempotent", max_of(|p| p.0), 1e-14),
        PropertyCheck::at_most("projection.nonexpansive", max_of(|p| p.1), 1e-12),
        PropertyCheck::at_most("projection.feasible", max_of(|p| p.2), 1e-12),
    ]
}
