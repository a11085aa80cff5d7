use std::sync::Arc;

use super::sparse::{dot, CsrPattern, SparseOperator};
use crate::control::Sym2;
use crate::error::{invalid, validation, Result};
use crate::mesh::{Mesh, TriangleGeometry};
use crate::par;

/// P1 discretization of a mesh: cached geometry, sparsity pattern, and the
/// coefficient-independent operators (consistent mass, lumped mass, Laplacian).
#[derive(Debug)]
pub struct FemSpace {
    mesh: Mesh,
    geometry: Vec<TriangleGeometry>,
    pattern: Arc<CsrPattern>,
    mass: SparseOperator,
    lumped: Vec<f64>,
    laplace: SparseOperator,
}

/// Degree-5, 7-point rule on the reference triangle: (barycentric, weight).
fn quadrature7() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let (a1, b1) = ((9.0 - 2.0 * s15) / 21.0, (6.0 + s15) / 21.0);
    let (a2, b2) = ((9.0 + 2.0 * s15) / 21.0, (6.0 - s15) / 21.0);
    let (w1, w2) = ((155.0 + s15) / 1200.0, (155.0 - s15) / 1200.0);
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// Collection of norms of one nodal field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
    pub l1: f64,
    /// `(s, |v|_{L^s})` for the requested exponent.
    pub ls: (f64, f64),
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let geometry = (0..mesh.num_triangles())
            .map(|t| mesh.triangle_geometry(t))
            .collect::<Result<Vec<_>>>()?;
        let pattern = Arc::new(CsrPattern::from_mesh(&mesh));

        let mass_elems = par::map_slice(&geometry, |g| {
            let (d, o) = (g.area / 6.0, g.area / 12.0);
            [d, o, o, o, d, o, o, o, d]
        });
        let mass = SparseOperator::from_elements(pattern.clone(), &mass_elems);
        let lumped = mass.apply(&vec![1.0; mesh.num_nodes()]);
        let identity = vec![Sym2::IDENTITY; mesh.num_triangles()];
        let laplace = SparseOperator::from_elements(pattern.clone(), &stiffness_elements(&geometry, &identity));
        Ok(FemSpace { mesh, geometry, pattern, mass, lumped, laplace })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_triangles(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn geometry(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    pub fn areas(&self) -> impl Iterator<Item = f64> + '_ {
        self.geometry.iter().map(|g| g.area)
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    /// Consistent mass matrix without boundary elimination.
    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// Row sums of the consistent mass matrix.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Unit-coefficient stiffness matrix without boundary elimination.
    pub fn laplace(&self) -> &SparseOperator {
        &self.laplace
    }

    /// Stiffness matrix of `-div(q grad u)` with homogeneous Dirichlet rows
    /// and columns eliminated.
    pub fn assemble_stiffness(&self, q: &[Sym2]) -> Result<SparseOperator> {
        Ok(self.assemble_stiffness_raw(q)?.with_mask(self.mesh.boundary_mask()))
    }

    /// Stiffness matrix without boundary elimination.
    pub fn assemble_stiffness_raw(&self, q: &[Sym2]) -> Result<SparseOperator> {
        if q.len() != self.num_triangles() {
            return Err(validation(format!(
                "coefficient has {} entries but mesh has {} triangles",
                q.len(),
                self.num_triangles()
            )));
        }
        if let Some(t) = q.iter().position(|m| !m.is_finite()) {
            return Err(validation(format!("coefficient on triangle {t} has non-finite entries")));
        }
        Ok(SparseOperator::from_elements(self.pattern.clone(), &stiffness_elements(&self.geometry, q)))
    }

    /// Unit-coefficient stiffness with boundary elimination.
    pub fn laplace_masked(&self) -> SparseOperator {
        self.laplace.with_mask(self.mesh.boundary_mask())
    }

    /// Zeroes the entries of boundary nodes.
    pub fn zero_boundary(&self, v: &mut [f64]) {
        for &b in self.mesh.boundary_nodes() {
            v[b] = 0.0;
        }
    }

    /// Consistent load vector `M f` restricted to interior rows.
    pub fn load(&self, f: &[f64]) -> Vec<f64> {
        let mut b = self.mass.apply(f);
        self.zero_boundary(&mut b);
        b
    }

    /// Constant gradient of a nodal field on triangle `t`.
    pub fn gradient(&self, field: &[f64], t: usize) -> [f64; 2] {
        let tri = self.mesh.triangles()[t];
        let g = &self.geometry[t].grads;
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += field[tri[a]] * g[a][0];
            out[1] += field[tri[a]] * g[a][1];
        }
        out
    }

    /// `(a, b)_{L^2}` of the P1 interpolants via the consistent mass matrix.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.bilinear(a, b)
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.l2_inner(v, v).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        self.laplace.bilinear(v, v).max(0.0).sqrt()
    }

    pub fn linf_norm(&self, v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `|v|_{L^s}` by 7-point quadrature of the P1 interpolant; `s = inf`
    /// gives the nodal maximum.
    pub fn ls_norm(&self, v: &[f64], s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return Err(invalid(format!("L^s norm needs s >= 1, got {s}")));
        }
        if s.is_infinite() {
            return Ok(self.linf_norm(v));
        }
        let rule = quadrature7();
        let tris = self.mesh.triangles();
        let per_elem = par::map_range(self.num_triangles(), |t| {
            let tri = tris[t];
            let sum: f64 = rule
                .iter()
                .map(|(bary, w)| {
                    let x = bary[0] * v[tri[0]] + bary[1] * v[tri[1]] + bary[2] * v[tri[2]];
                    w * x.abs().powf(s)
                })
                .sum();
            sum * self.geometry[t].area
        });
        Ok(par::ordered_sum(per_elem).powf(1.0 / s))
    }

    pub fn l1_norm(&self, v: &[f64]) -> f64 {
        self.ls_norm(v, 1.0).expect("s = 1 is valid")
    }

    pub fn norms(&self, v: &[f64], s: f64) -> Result<FieldNorms> {
        if v.len() != self.num_nodes() {
            return Err(validation(format!("field has {} values, mesh has {} nodes", v.len(), self.num_nodes())));
        }
        Ok(FieldNorms {
            l2: self.l2_norm(v),
            h1_semi: self.h1_seminorm(v),
            linf: self.linf_norm(v),
            l1: self.l1_norm(v),
            ls: (s, self.ls_norm(v, s)?),
        })
    }

    /// `sum_i m_i a_i b_i` with lumped mass weights.
    pub fn lumped_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        par::ordered_sum(self.lumped.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y))
    }

    /// Euclidean norm of `v` over interior nodes.
    pub fn interior_norm(&self, v: &[f64]) -> f64 {
        par::ordered_sum(self.mesh.interior_nodes().iter().map(|&i| v[i] * v[i])).sqrt()
    }

    /// Unit-coefficient energy pairing `(grad a, grad b)`.
    pub fn h1_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.laplace.apply(b))
    }
}

/// Element stiffness blocks `|T| (q_T grad phi_b) . grad phi_a`.
pub fn stiffness_elements(geometry: &[TriangleGeometry], q: &[Sym2]) -> Vec<[f64; 9]> {
    par::map_range(geometry.len(), |t| {
        let g = &geometry[t];
        let m = q[t];
        let qg: [[f64; 2]; 3] = g.grads.map(|v| m.apply(v));
        let mut ke = [0.0; 9];
        for a in 0..3 {
            for b in a..3 {
                let v = g.area * (g.grads[a][0] * qg[b][0] + g.grads[a][1] * qg[b][1]);
                ke[3 * a + b] = v;
                ke[3 * b + a] = v;
            }
        }
        ke
    })
}
