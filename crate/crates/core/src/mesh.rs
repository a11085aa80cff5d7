//! Conforming triangulations of convex polygonal domains.
//!
//! Meshes are immutable after construction. Node indices of the structured
//! unit-square mesh are lexicographic in `(y, x)` and every grid cell is split
//! along its lower-left to upper-right diagonal, so all downstream numbers are
//! reproducible.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    on_boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
}

/// Area and constant barycentric gradients of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

/// Non-fatal issue found while building a mesh from external data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshWarning {
    /// Triangle was given clockwise and has been reoriented.
    Reoriented { triangle: usize },
}

/// Validation failure tied to a triangle, so file readers can map it to a line.
struct TriangleFault {
    triangle: Option<usize>,
    message: String,
}

impl Mesh {
    /// Builds a mesh from raw parts, validating connectivity.
    ///
    /// Clockwise triangles are reoriented and reported as warnings.
    pub fn from_parts(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_nodes: Vec<usize>,
    ) -> Result<(Self, Vec<MeshWarning>)> {
        Self::build(nodes, triangles, boundary_nodes).map_err(|f| match f.triangle {
            Some(t) => Error::Validation(format!("triangle {t}: {}", f.message)),
            None => Error::Validation(f.message),
        })
    }

    fn build(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary_nodes: Vec<usize>,
    ) -> std::result::Result<(Self, Vec<MeshWarning>), TriangleFault> {
        let fault = |triangle: Option<usize>, message: String| TriangleFault { triangle, message };
        let n = nodes.len();
        if n < 3 || triangles.is_empty() {
            return Err(fault(None, "mesh needs at least 3 nodes and 1 triangle".into()));
        }
        if let Some(i) = nodes.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(fault(None, format!("node {i} has non-finite coordinates")));
        }

        let mut warnings = Vec::new();
        for (t, tri) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(fault(Some(t), format!("node index {bad} out of range (0..{n})")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(fault(Some(t), "repeated node index".into()));
            }
            let area = signed_area(&nodes, tri);
            if area == 0.0 || !area.is_finite() {
                return Err(fault(Some(t), format!("degenerate triangle (signed area {area:e})")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
                warnings.push(MeshWarning::Reoriented { triangle: t });
            }
        }

        let mut on_boundary = vec![false; n];
        for &b in &boundary_nodes {
            if b >= n {
                return Err(fault(None, format!("boundary node index {b} out of range (0..{n})")));
            }
            on_boundary[b] = true;
        }

        // Each undirected edge may be shared by at most two triangles; edges
        // owned by a single triangle must connect two boundary nodes.
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edges.entry(key).or_insert((0, t));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(fault(
                        Some(t),
                        format!("edge ({}, {}) shared by more than two triangles", key.0, key.1),
                    ));
                }
            }
        }
        let mut open: Vec<_> = edges
            .iter()
            .filter(|(&(a, b), &(count, _))| count == 1 && !(on_boundary[a] && on_boundary[b]))
            .map(|(&(a, b), &(_, t))| (t, a, b))
            .collect();
        open.sort_unstable();
        if let Some(&(t, a, b)) = open.first() {
            return Err(fault(
                Some(t),
                format!("edge ({a}, {b}) lies on the mesh boundary but its nodes are not marked boundary"),
            ));
        }

        let mut boundary_nodes: Vec<usize> = (0..n).filter(|&i| on_boundary[i]).collect();
        boundary_nodes.dedup();
        let interior_nodes = (0..n).filter(|&i| !on_boundary[i]).collect();
        Ok((
            Mesh { nodes, triangles, on_boundary, boundary_nodes, interior_nodes },
            warnings,
        ))
    }

    /// Structured triangulation of the unit square with `n` cells per side.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("unit square mesh needs n >= 1 subdivisions"));
        }
        let side = n + 1;
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity(side * side);
        let mut boundary = Vec::new();
        for j in 0..side {
            for i in 0..side {
                // i * h rather than accumulated sums so the far edge is exactly 1.
                nodes.push([if i == n { 1.0 } else { i as f64 * h }, if j == n { 1.0 } else { j as f64 * h }]);
                if i == 0 || j == 0 || i == n || j == n {
                    boundary.push(j * side + i);
                }
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let (mesh, warnings) = Self::from_parts(nodes, triangles, boundary)?;
        debug_assert!(warnings.is_empty());
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// Boundary flag per node.
    pub fn boundary_mask(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Index of the node closest to `p` (lowest index wins ties).
    pub fn nearest_node(&self, p: Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.nodes.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn triangle_geometry(&self, t: usize) -> Result<TriangleGeometry> {
        let tri = self
            .triangles
            .get(t)
            .ok_or_else(|| invalid(format!("triangle index {t} out of range")))?;
        let area = signed_area(&self.nodes, tri);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { triangle: t, area });
        }
        let [p0, p1, p2] = tri.map(|v| self.nodes[v]);
        let d = 2.0 * area;
        Ok(TriangleGeometry {
            area,
            grads: [
                [(p1[1] - p2[1]) / d, (p2[0] - p1[0]) / d],
                [(p2[1] - p0[1]) / d, (p0[0] - p2[0]) / d],
                [(p0[1] - p1[1]) / d, (p1[0] - p0[0]) / d],
            ],
        })
    }

    /// Serializes to the plain-text mesh format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary_nodes.len());
        for b in &self.boundary_nodes {
            let _ = writeln!(s, "{b}");
        }
        s
    }

    /// Parses the plain-text mesh format. Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<(Self, Vec<MeshWarning>)> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let last_line = text.lines().count().max(1);

        let n_nodes = section_header(&mut lines, last_line, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, l) = next_line(&mut lines, last_line, "node coordinates")?;
            let v = parse_fields::<f64>(l, 2, line)?;
            nodes.push([v[0], v[1]]);
        }
        let n_tri = section_header(&mut lines, last_line, "triangles")?;
        let mut triangles = Vec::with_capacity(n_tri);
        let mut tri_lines = Vec::with_capacity(n_tri);
        for _ in 0..n_tri {
            let (line, l) = next_line(&mut lines, last_line, "triangle")?;
            let v = parse_fields::<usize>(l, 3, line)?;
            triangles.push([v[0], v[1], v[2]]);
            tri_lines.push(line);
        }
        let n_bnd = section_header(&mut lines, last_line, "boundary")?;
        let mut boundary = Vec::with_capacity(n_bnd);
        let mut boundary_lines = Vec::with_capacity(n_bnd);
        for _ in 0..n_bnd {
            let (line, l) = next_line(&mut lines, last_line, "boundary node")?;
            let v = parse_fields::<usize>(l, 1, line)?;
            boundary.push(v[0]);
            boundary_lines.push(line);
        }
        if let Some((line, l)) = lines.next() {
            return Err(Error::Parse { line, message: format!("unexpected trailing content `{l}`") });
        }
        if let Some(pos) = boundary.iter().position(|&b| b >= nodes.len()) {
            return Err(Error::Parse {
                line: boundary_lines[pos],
                message: format!("boundary node index {} out of range (0..{})", boundary[pos], nodes.len()),
            });
        }

        Self::build(nodes, triangles, boundary).map_err(|f| Error::Parse {
            line: f.triangle.map_or(1, |t| tri_lines[t]),
            message: f.message,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<(Self, Vec<MeshWarning>)> {
        let text = std::fs::read_to_string(path)?;
        let (mesh, warnings) = Self::parse(&text)?;
        for w in &warnings {
            log::warn!("mesh: {w:?}");
        }
        Ok((mesh, warnings))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn signed_area(nodes: &[Point], tri: &[usize; 3]) -> f64 {
    let [p0, p1, p2] = tri.map(|v| nodes[v]);
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn next_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    last_line: usize,
    what: &str,
) -> Result<(usize, &'a str)> {
    lines.next().ok_or_else(|| Error::Parse { line: last_line, message: format!("unexpected end of file reading {what}") })
}

fn section_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    last_line: usize,
    expected: &str,
) -> Result<usize> {
    let (line, l) = next_line(lines, last_line, expected)?;
    let mut it = l.split_whitespace();
    match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
        (Some(k), Some(Ok(count)), None) if k == expected => Ok(count),
        _ => Err(Error::Parse { line, message: format!("expected `{expected} <count>`, found `{l}`") }),
    }
}

pub(crate) fn parse_fields<T: std::str::FromStr>(l: &str, count: usize, line: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = l.split_whitespace().collect();
    if parts.len() != count {
        return Err(Error::Parse { line, message: format!("expected {count} values, found {}", parts.len()) });
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|_| Error::Parse { line, message: format!("cannot parse `{p}`") }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![0, 1, 2]).unwrap().0
    }

    #[test]
    fn unit_square_counts() {
        for (n, nodes, tris, bnd, int) in [(1, 4, 2, 4, 0), (2, 9, 8, 8, 1), (64, 4225, 8192, 256, 3969)] {
            let m = Mesh::unit_square(n).unwrap();
            assert_eq!(m.num_nodes(), nodes);
            assert_eq!(m.num_triangles(), tris);
            assert_eq!(m.boundary_nodes().len(), bnd);
            assert_eq!(m.interior_nodes().len(), int);
        }
        assert!(matches!(Mesh::unit_square(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unit_square_area_sums_to_one() {
        for n in [1, 2, 3, 7, 16, 64, 100, 256] {
            let m = Mesh::unit_square(n).unwrap();
            let total: f64 = (0..m.num_triangles()).map(|t| m.triangle_geometry(t).unwrap().area).sum();
            assert!((total - 1.0).abs() <= 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn interior_valence_is_uniform() {
        let m = Mesh::unit_square(8).unwrap();
        let mut valence = vec![0usize; m.num_nodes()];
        for t in m.triangles() {
            for &v in t {
                valence[v] += 1;
            }
        }
        assert!(m.interior_nodes().iter().all(|&i| valence[i] == 6));
    }

    #[test]
    fn unit_triangle_geometry() {
        let g = unit_triangle().triangle_geometry(0).unwrap();
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn scaled_triangle_geometry() {
        let m = Mesh::from_parts(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]], vec![[0, 1, 2]], vec![0, 1, 2]).unwrap().0;
        let g = m.triangle_geometry(0).unwrap();
        assert_eq!(g.area, 2.0);
        assert_eq!(g.grads, [[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn gradients_sum_to_zero() {
        let m = Mesh::from_parts(vec![[0.1, 0.3], [1.7, -0.2], [0.4, 2.9]], vec![[0, 1, 2]], vec![0, 1, 2]).unwrap().0;
        let g = m.triangle_geometry(0).unwrap();
        for d in 0..2 {
            assert!((g.grads[0][d] + g.grads[1][d] + g.grads[2][d]).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let err = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]], vec![0, 1, 2]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = Mesh::unit_square(2).unwrap();
        let (back, warnings) = Mesh::parse(&m.to_text()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, m);

        let irregular = Mesh::from_parts(
            vec![[0.0, 0.0], [0.1 + 0.2, 1e-300], [1.0 / 3.0, 0.7]],
            vec![[0, 1, 2]],
            vec![0, 1, 2],
        )
        .unwrap()
        .0;
        assert_eq!(Mesh::parse(&irregular.to_text()).unwrap().0, irregular);
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let text = "# tiny\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 5\nboundary 3\n0\n1\n2\n";
        match Mesh::parse(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn clockwise_triangle_is_reoriented() {
        let text = "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\nboundary 3\n0\n1\n2\n";
        let (m, warnings) = Mesh::parse(text).unwrap();
        assert_eq!(warnings, vec![MeshWarning::Reoriented { triangle: 0 }]);
        assert!(m.triangle_geometry(0).unwrap().area > 0.0);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(matches!(Mesh::parse("nodes 2\n0 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(Mesh::parse("nodes 1\n0 zero\n"), Err(Error::Parse { line: 2, .. })));
        // Interior-looking open edge: node 2 not marked boundary.
        let text = "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 2\n0\n1\n";
        assert!(matches!(Mesh::parse(text), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn edge_shared_by_three_triangles_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let tris = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(Mesh::from_parts(nodes, tris, vec![0, 1, 2, 3, 4]).is_err());
    }
}
