//! Named pass/fail measurements shared by the verification battery.

use std::fmt;

/// One named property check with measured value and threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl PropertyCheck {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        PropertyCheck { name: name.into(), measured, threshold, pass: measured <= threshold }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        PropertyCheck { name: name.into(), measured, threshold, pass: measured >= threshold }
    }

    /// A check whose measurement could not be taken.
    pub fn failed(name: impl Into<String>, threshold: f64) -> Self {
        PropertyCheck { name: name.into(), measured: f64::NAN, threshold, pass: false }
    }
}

/// `CHECK <name> PASS|FAIL <measured> <threshold>`.
impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "CHECK {} {verdict} {:e} {:e}", self.name, self.measured, self.threshold)
    }
}
