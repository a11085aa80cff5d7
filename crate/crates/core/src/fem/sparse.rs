use std::collections::BTreeSet;
use std::sync::Arc;

use crate::mesh::Mesh;
use crate::par;

/// CSR sparsity pattern of the P1 node graph plus per-triangle scatter maps.
#[derive(Debug)]
pub struct CsrPattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag_pos: Vec<usize>,
    /// For triangle `t`, `scatter[t][3 * a + b]` is the value slot of
    /// entry `(tri[a], tri[b])`.
    scatter: Vec<[usize; 9]>,
}

impl CsrPattern {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let n = mesh.num_nodes();
        let mut adjacency = vec![BTreeSet::new(); n];
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    adjacency[a].insert(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in &adjacency {
            col_idx.extend(cols.iter().copied());
            row_ptr.push(col_idx.len());
        }
        let find = |row: usize, col: usize| -> usize {
            let slice = &col_idx[row_ptr[row]..row_ptr[row + 1]];
            row_ptr[row] + slice.binary_search(&col).expect("entry in pattern")
        };
        let diag_pos = (0..n).map(|i| find(i, i)).collect();
        let scatter = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = find(tri[a], tri[b]);
                    }
                }
                s
            })
            .collect();
        CsrPattern { row_ptr, col_idx, diag_pos, scatter }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim())
            .flat_map(|i| self.row(i).iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub(crate) fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }
}

/// Symmetric sparse matrix sharing a node-graph pattern.
///
/// When a Dirichlet mask is applied, masked rows and columns are replaced by
/// the identity so the operator stays symmetric and acts on full-length nodal
/// vectors.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
    mask: Option<Arc<[bool]>>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseOperator { pattern, values, mask: None }
    }

    /// Assembles `sum_t scatter(element[t])` in fixed triangle order.
    pub fn from_elements(pattern: Arc<CsrPattern>, elements: &[[f64; 9]]) -> Self {
        let mut op = Self::zeros(pattern);
        for (slots, ke) in op.pattern.scatter.iter().zip(elements) {
            for k in 0..9 {
                op.values[slots[k]] += ke[k];
            }
        }
        op
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[i])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.pattern.row_range(i);
        match self.pattern.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diag_pos.iter().map(|&p| self.values[p]).collect()
    }

    /// Returns a copy with rows/columns in `mask` eliminated (identity rows).
    pub fn with_mask(&self, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), self.dim(), "mask length");
        let mut out = self.clone();
        for i in 0..self.dim() {
            for k in self.pattern.row_range(i) {
                let j = self.pattern.col_idx[k];
                if mask[i] || mask[j] {
                    out.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        out.mask = Some(mask.into());
        out
    }

    /// Adds `d[i]` to the diagonal of every unmasked row.
    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, di) in d.iter().enumerate().take(self.dim()) {
            if !self.is_masked(i) {
                self.values[self.pattern.diag_pos[i]] += di;
            }
        }
    }

    /// Entrywise `self + other`; both must share a pattern and mask state.
    pub fn add(&self, other: &SparseOperator) -> SparseOperator {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "operators on different patterns");
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += w;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `y = A x`. Rows are independent, so the parallel build is bitwise
    /// identical to the sequential one.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        par::fill(y, |i| {
            let mut acc = 0.0;
            for k in p.row_range(i) {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            acc
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.pattern.row_range(i).all(|k| {
                let j = self.pattern.col_idx[k];
                self.values[k] == self.get(j, i)
            })
        })
    }

    /// Dense copy; test and debugging aid for small systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row_range(i) {
                row[self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::ordered_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
