//! C² approximations of `x ↦ max(0, x)` used to penalize the obstacle.
//!
//! A family member `max_γ` must satisfy, for every `γ > 0`:
//!
//! * `0 ≤ max_γ(x) ≤ max(0, x)`, with equality for `x ≤ 0` and `x ≥ 1/(2γ)`;
//! * `0 ≤ max_γ'(x) ≤ 2` and `|max_γ''(x)| ≤ M γ`;
//! * `(1/c1) max_γ'(x) x ≤ max_γ(x) ≤ c2 max_γ'(x) x`.
//!
//! [`PolynomialMax`] is the quintic splice used by default (`c1 = 7`,
//! `c2 = 1`, `M = 8`). Other implementations can be checked against the same
//! property suite with [`certify`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::par;

pub use crate::check::PropertyCheck;

/// Structural constants of a smoothed-max family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxConstants {
    pub c1: f64,
    pub c2: f64,
    /// Second-derivative bound constant: `|max_γ''| ≤ m γ`.
    pub m: f64,
}

pub trait SmoothMax: Send + Sync {
    fn gamma(&self) -> f64;
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn deriv2(&self, x: f64) -> f64;
    fn constants(&self) -> MaxConstants;

    /// Value and first two derivatives of the inner (smoothing) branch,
    /// evaluated at any `x`. Lets the certificate check C² continuity
    /// exactly at the knots; `None` falls back to one-sided limits.
    fn splice_branch(&self, _x: f64) -> Option<[f64; 3]> {
        None
    }

    /// Penalty `r = -γ max_γ(ψ - u)` and `∂r/∂u = γ max_γ'(ψ - u)`.
    fn penalty(&self, psi: f64, u: f64) -> (f64, f64) {
        let g = self.gamma();
        (-g * self.value(psi - u), g * self.deriv(psi - u))
    }
}

/// Constructs family members for a given `γ`.
pub trait MaxFamily: Send + Sync {
    fn name(&self) -> &str;
    fn at(&self, gamma: f64) -> Result<Box<dyn SmoothMax>>;
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("regularization parameter must be positive and finite, got {gamma}")))
    }
}

/// Quintic splice on `(0, 1/(2γ))`, `max(0, x)` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolynomialMax {
    gamma: f64,
}

impl PolynomialMax {
    pub const CONSTANTS: MaxConstants = MaxConstants { c1: 7.0, c2: 1.0, m: 8.0 };

    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(PolynomialMax { gamma })
    }

    fn in_splice(&self, x: f64) -> bool {
        x > 0.0 && x < 0.5 / self.gamma
    }

    /// Quintic and its derivatives in Horner form in `t = γx`.
    fn poly(&self, x: f64) -> [f64; 3] {
        let g = self.gamma;
        let t = g * x;
        [
            t * t * t * (24.0 + t * (-64.0 + 48.0 * t)) / g,
            t * t * (72.0 + t * (-256.0 + 240.0 * t)),
            g * t * (144.0 + t * (-768.0 + 960.0 * t)),
        ]
    }
}

impl SmoothMax for PolynomialMax {
    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn value(&self, x: f64) -> f64 {
        if self.in_splice(x) {
            self.poly(x)[0]
        } else {
            x.max(0.0)
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        if self.in_splice(x) {
            self.poly(x)[1]
        } else if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn deriv2(&self, x: f64) -> f64 {
        if self.in_splice(x) {
            self.poly(x)[2]
        } else {
            0.0
        }
    }

    fn splice_branch(&self, x: f64) -> Option<[f64; 3]> {
        Some(self.poly(x))
    }

    fn constants(&self) -> MaxConstants {
        Self::CONSTANTS
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PolynomialFamily;

impl MaxFamily for PolynomialFamily {
    fn name(&self) -> &str {
        "polynomial"
    }

    fn at(&self, gamma: f64) -> Result<Box<dyn SmoothMax>> {
        Ok(Box::new(PolynomialMax::new(gamma)?))
    }
}

/// Multiplies another member by a constant factor. With `factor > 1` it
/// violates `max_γ ≤ max(0, ·)`; used to seed faults into the verifier.
#[derive(Clone, Copy, Debug)]
pub struct ScaledMax<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: SmoothMax> SmoothMax for ScaledMax<M> {
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    fn value(&self, x: f64) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn deriv(&self, x: f64) -> f64 {
        self.factor * self.inner.deriv(x)
    }
    fn deriv2(&self, x: f64) -> f64 {
        self.factor * self.inner.deriv2(x)
    }
    fn constants(&self) -> MaxConstants {
        self.inner.constants()
    }
    fn splice_branch(&self, x: f64) -> Option<[f64; 3]> {
        self.inner.splice_branch(x).map(|b| b.map(|v| self.factor * v))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScaledPolynomialFamily {
    pub factor: f64,
}

impl MaxFamily for ScaledPolynomialFamily {
    fn name(&self) -> &str {
        "scaled-polynomial"
    }

    fn at(&self, gamma: f64) -> Result<Box<dyn SmoothMax>> {
        Ok(Box::new(ScaledMax { inner: PolynomialMax::new(gamma)?, factor: self.factor }))
    }
}

/// Measured property values of one family member. Every field is a raw
/// measurement; thresholds live in [`MaxCertificate::checks`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaxCertificate {
    pub gamma: f64,
    pub samples: usize,
    /// Max |difference| of value/deriv/deriv2 against the outer branches at
    /// `x = 0` and `x = 1/(2γ)`.
    pub splice_gap: f64,
    /// `max (max_γ(x) - max(0, x))`, must be ≤ 0.
    pub upper_excess: f64,
    /// `min max_γ(x)`, must be ≥ 0.
    pub min_value: f64,
    /// Largest deviation from `max(0, x)` outside the splice interval.
    pub outer_branch_gap: f64,
    pub min_deriv: f64,
    pub max_deriv: f64,
    /// `max |max_γ''| / γ`.
    pub max_deriv2_over_gamma: f64,
    /// `max ((1/c1) max_γ'(x) x - max_γ(x))` over `x > 0`, must be ≤ 0.
    pub lower_sandwich_excess: f64,
    /// `max (max_γ(x) - c2 max_γ'(x) x)` over `x > 0`, must be ≤ 0.
    pub upper_sandwich_excess: f64,
    /// Max relative error of `deriv` against central differences of `value`.
    pub fd_deriv_error: f64,
    /// Same for `deriv2` against differences of `deriv`.
    pub fd_deriv2_error: f64,
    pub constants: MaxConstants,
}

impl MaxCertificate {
    pub fn checks(&self) -> Vec<PropertyCheck> {
        let slack = 1e-12;
        vec![
            PropertyCheck::at_most("smoothed_max.splice_c2", self.splice_gap, 1e-12),
            PropertyCheck::at_most("smoothed_max.upper_bound", self.upper_excess, slack),
            PropertyCheck::at_least("smoothed_max.nonnegative", self.min_value, 0.0),
            PropertyCheck::at_most("smoothed_max.outer_branch_exact", self.outer_branch_gap, 0.0),
            PropertyCheck::at_least("smoothed_max.deriv_min", self.min_deriv, 0.0),
            PropertyCheck::at_most("smoothed_max.deriv_max", self.max_deriv, 2.0),
            PropertyCheck::at_most("smoothed_max.deriv2_bound", self.max_deriv2_over_gamma, self.constants.m),
            PropertyCheck::at_most("smoothed_max.sandwich_lower", self.lower_sandwich_excess, slack),
            PropertyCheck::at_most("smoothed_max.sandwich_upper", self.upper_sandwich_excess, slack),
            PropertyCheck::at_most("smoothed_max.fd_deriv", self.fd_deriv_error, 1e-6),
            PropertyCheck::at_most("smoothed_max.fd_deriv2", self.fd_deriv2_error, 1e-6),
        ]
    }

    pub fn passes(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }
}

/// Runs the property suite on `m` with `samples` seeded uniform points in
/// `[-2/γ, 2/γ]` plus 100 finite-difference probes.
pub fn certify(m: &dyn SmoothMax, samples: usize, seed: u64) -> MaxCertificate {
    let gamma = m.gamma();
    let knot = 0.5 / gamma;
    let consts = m.constants();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..samples).map(|_| rng.gen_range(-2.0 / gamma..=2.0 / gamma)).collect();
    xs.extend([0.0, knot, -knot, 2.0 * knot, f64::MIN_POSITIVE, knot * (1.0 - 1e-12)]);

    // Outer branches at the knots are (0, 0, 0) and (knot, 1, 0).
    let outer = [[0.0, 0.0, 0.0], [knot, 1.0, 0.0]];
    let inner = match (m.splice_branch(0.0), m.splice_branch(knot)) {
        (Some(a), Some(b)) => [a, b],
        _ => {
            let eps = 1e-9 * knot;
            let left = |x: f64| [m.value(x), m.deriv(x), m.deriv2(x)];
            [left(eps), left(knot - eps)]
        }
    };
    let splice_gap = (0..2)
        .flat_map(|k| (0..3).map(move |j| (k, j)))
        .map(|(k, j)| (inner[k][j] - outer[k][j]).abs())
        .fold(0.0f64, f64::max);

    struct Sample {
        upper: f64,
        value: f64,
        outer_gap: f64,
        deriv: f64,
        d2: f64,
        lower_sw: f64,
        upper_sw: f64,
    }
    let per = par::map_slice(&xs, |&x| {
        let (v, d, d2) = (m.value(x), m.deriv(x), m.deriv2(x));
        let outer = x <= 0.0 || x >= knot;
        Sample {
            upper: v - x.max(0.0),
            value: v,
            outer_gap: if outer { (v - x.max(0.0)).abs() } else { 0.0 },
            deriv: d,
            d2: d2.abs() / gamma,
            lower_sw: if x > 0.0 { d * x / consts.c1 - v } else { f64::NEG_INFINITY },
            upper_sw: if x > 0.0 { v - consts.c2 * d * x } else { f64::NEG_INFINITY },
        }
    });
    let fold_max = |f: &dyn Fn(&Sample) -> f64| per.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |f: &dyn Fn(&Sample) -> f64| per.iter().map(f).fold(f64::INFINITY, f64::min);

    // Finite-difference probes strictly inside the pieces so the stencil
    // never straddles a knot.
    let h = 1e-6 * knot;
    let probes: Vec<f64> = (0..100)
        .map(|k| match k % 3 {
            0 => rng.gen_range(0.02 * knot..0.98 * knot),
            1 => rng.gen_range(-2.0 / gamma..-0.02 * knot),
            _ => rng.gen_range(1.02 * knot..2.0 / gamma),
        })
        .collect();
    let rel = |approx: f64, exact: f64, scale: f64| (approx - exact).abs() / exact.abs().max(scale);
    let fd = par::map_slice(&probes, |&x| {
        let dv = (m.value(x + h) - m.value(x - h)) / (2.0 * h);
        let dd = (m.deriv(x + h) - m.deriv(x - h)) / (2.0 * h);
        // Scales: typical magnitudes of deriv (1) and deriv2 (γ).
        (rel(dv, m.deriv(x), 1e-3), rel(dd, m.deriv2(x), 1e-3 * gamma))
    });

    MaxCertificate {
        gamma,
        samples: xs.len(),
        splice_gap,
        upper_excess: fold_max(&|s| s.upper),
        min_value: fold_min(&|s| s.value),
        outer_branch_gap: fold_max(&|s| s.outer_gap),
        min_deriv: fold_min(&|s| s.deriv),
        max_deriv: fold_max(&|s| s.deriv),
        max_deriv2_over_gamma: fold_max(&|s| s.d2),
        lower_sandwich_excess: fold_max(&|s| s.lower_sw),
        upper_sandwich_excess: fold_max(&|s| s.upper_sw),
        fd_deriv_error: fd.iter().map(|e| e.0).fold(0.0, f64::max),
        fd_deriv2_error: fd.iter().map(|e| e.1).fold(0.0, f64::max),
        constants: consts,
    }
}
