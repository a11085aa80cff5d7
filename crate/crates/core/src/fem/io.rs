use std::fmt::Write as _;
use std::path::Path;

use crate::error::{validation, Error, Result};
use crate::mesh::{parse_fields, Mesh};

/// Nodal P1 coefficient vector (states, adjoints, nodal multipliers, data).
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    pub values: Vec<f64>,
}

impl StateField {
    pub fn zeros(n: usize) -> Self {
        StateField { values: vec![0.0; n] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        StateField { values: vec![c; n] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        StateField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Checks the homogeneous Dirichlet condition on `mesh`.
    pub fn check_boundary(&self, mesh: &Mesh) -> Result<()> {
        if self.len() != mesh.num_nodes() {
            return Err(validation(format!("field has {} values, mesh has {} nodes", self.len(), mesh.num_nodes())));
        }
        match mesh.boundary_nodes().iter().find(|&&b| self.values[b] != 0.0) {
            Some(&b) => Err(validation(format!("field is nonzero ({}) at boundary node {b}", self.values[b]))),
            None => Ok(()),
        }
    }
}

/// Full-precision (17 significant digits) float formatting used by every
/// text output.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn field_to_text(values: &[f64]) -> String {
    let mut s = String::with_capacity(24 * (values.len() + 1));
    let _ = writeln!(s, "field {}", values.len());
    for v in values {
        s.push_str(&format_f64(*v));
        s.push('\n');
    }
    s
}

pub fn parse_field(text: &str) -> Result<Vec<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty field file".into() })?;
    let mut it = header.split_whitespace();
    let n = match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
        (Some("field"), Some(Ok(n)), None) => n,
        _ => return Err(Error::Parse { line, message: format!("expected `field <count>`, found `{header}`") }),
    };
    let mut values = Vec::with_capacity(n);
    for (line, l) in lines {
        if values.len() == n {
            return Err(Error::Parse { line, message: "more values than declared".into() });
        }
        values.push(parse_fields::<f64>(l, 1, line)?[0]);
    }
    if values.len() != n {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("declared {n} values, found {}", values.len()),
        });
    }
    Ok(values)
}

pub fn write_field(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    std::fs::write(path, field_to_text(values))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_field(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_bit_exact() {
        let v = vec![0.0, -0.0, 1.0 / 3.0, 1e-310, -2.5e300, std::f64::consts::PI];
        let back = parse_field(&field_to_text(&v)).unwrap();
        assert_eq!(v.len(), back.len());
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn field_count_mismatch_rejected() {
        assert!(matches!(parse_field("field 3\n1\n2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_field("field 1\n1\n2\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_field("values 1\n1\n"), Err(Error::Parse { line: 1, .. })));
    }
}
